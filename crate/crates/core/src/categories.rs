//! The 40-class label set used throughout: ids, names and the classes that
//! are typically ridden or carried by a person.

/// `(id, name)` pairs, ids starting at 1.
pub const CATEGORIES: [(u32, &str); 40] = [
    (1, "airplane"),
    (2, "bear"),
    (3, "bird"),
    (4, "boat"),
    (5, "car"),
    (6, "cat"),
    (7, "cow"),
    (8, "deer"),
    (9, "dog"),
    (10, "duck"),
    (11, "earless_seal"),
    (12, "elephant"),
    (13, "fish"),
    (14, "flying_disc"),
    (15, "fox"),
    (16, "frog"),
    (17, "giant_panda"),
    (18, "giraffe"),
    (19, "horse"),
    (20, "leopard"),
    (21, "lizard"),
    (22, "monkey"),
    (23, "motorbike"),
    (24, "mouse"),
    (25, "parrot"),
    (26, "person"),
    (27, "rabbit"),
    (28, "shark"),
    (29, "skateboard"),
    (30, "snake"),
    (31, "snowboard"),
    (32, "squirrel"),
    (33, "surfboard"),
    (34, "tennis_racket"),
    (35, "tiger"),
    (36, "train"),
    (37, "truck"),
    (38, "turtle"),
    (39, "whale"),
    (40, "zebra"),
];

pub const PERSON: u32 = 26;

/// Classes linked to a person track during post-processing.
pub const RIDER_CLASSES: [&str; 6] = [
    "boat",
    "motorbike",
    "skateboard",
    "snowboard",
    "surfboard",
    "tennis_racket",
];

pub fn category_name(id: u32) -> Option<&'static str> {
    CATEGORIES.iter().find(|(i, _)| *i == id).map(|(_, n)| *n)
}

pub fn category_id(name: &str) -> Option<u32> {
    CATEGORIES.iter().find(|(_, n)| *n == name).map(|(i, _)| *i)
}

pub fn is_rider_class(id: u32) -> bool {
    category_name(id).is_some_and(|n| RIDER_CLASSES.contains(&n))
}
