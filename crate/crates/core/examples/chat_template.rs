//! Rendering a multi-turn conversation and parsing it back.

use corpuskit::chat_template::{parse, render, Conversation, Turn};

fn main() {
    let conv = Conversation::new(vec![
        Turn::system("Anda ialah pembantu yang membantu."),
        Turn::user("Apakah ibu negara Malaysia?"),
        Turn::assistant("Ibu negara Malaysia ialah Kuala Lumpur."),
        Turn::user("Bagaimana dengan pusat pentadbiran?"),
        Turn::assistant("Putrajaya."),
    ]);
    let text = render(&conv).unwrap();
    println!("{text}\n");
    let back = parse(&text).unwrap();
    for t in &back.turns {
        println!("{:?}: {}", t.role, t.content);
    }
}
