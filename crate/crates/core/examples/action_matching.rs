//! Per-step action matching on a 1080x2400 screen.

use odyssey::matching::{anls, match_step, normalized_distance, scroll_direction, DISTANCE_THRESHOLD};
use odyssey::{Action, BoundingBox, DeviceInfo, Point};

fn click(x: u32, y: u32) -> Action {
    Action::Click { pos1: Point::new(x, y) }
}

fn main() {
    let device = DeviceInfo::new("Pixel 7 Pro", 1080, 2400);
    let gold = click(540, 1200);

    // 336 px straight down is exactly 0.14 of the height: still a hit
    let edge = Point::new(540, 1536);
    let d = normalized_distance(edge, Point::new(540, 1200), &device).unwrap();
    println!("d = {d} (threshold {DISTANCE_THRESHOLD})");
    println!("edge:     {:?}", match_step(&click(540, 1536), &gold, &device, None).reason);
    println!("one more: {:?}", match_step(&click(540, 1537), &gold, &device, None).reason);

    // a far click inside the target's box still counts
    let bbox = BoundingBox::new(Point::new(0, 1000), Point::new(1079, 1900));
    println!("in box:   {:?}", match_step(&click(540, 1800), &gold, &device, Some(&bbox)).reason);

    // scrolls compare direction only
    let up = Action::Scroll { pos1: Point::new(540, 1800), pos2: Point::new(540, 600) };
    let up_short = Action::Scroll { pos1: Point::new(100, 900), pos2: Point::new(120, 850) };
    println!("{:?}", scroll_direction(Point::new(540, 1800), Point::new(540, 600)));
    println!("scroll:   {:?}", match_step(&up_short, &up, &device, None).reason);

    // typed text uses normalized Levenshtein similarity
    for (pred, gold) in [("yoga mat", "Yoga Mat"), ("yoga", "yoga mats"), ("hello", "world")] {
        let typed = |t: &str| Action::Type { text: t.into() };
        println!(
            "anls({pred:?}, {gold:?}) = {:.3} -> {:?}",
            anls(pred, gold),
            match_step(&typed(pred), &typed(gold), &device, None).reason
        );
    }

    println!("type:     {:?}", match_step(&Action::Back, &Action::Home, &device, None).reason);
}
