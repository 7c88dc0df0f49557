//! A multi-turn synthetic conversation from a paragraph, using the offline
//! mock client and the wordlist Indonesian detector.

use corpuskit::chat_template::render;
use corpuskit::synthgen::client::MockClient;
use corpuskit::synthgen::{ultrachat, GenerationParams, UltrachatOptions, WordlistHook};

fn main() {
    let paragraph = "Tasik Chini ialah tasik semula jadi kedua terbesar di Malaysia.";
    let question = "Bisakah kamu jelaskan kenapa tasik ini penting karena saya penasaran?";
    let opts = UltrachatOptions {
        turns: 2,
        params: GenerationParams::default().with_seed(1),
        translate_all: false,
    };
    let hook = WordlistHook::new().with_translator(|s| s.replace("Bisakah", "Bolehkah").replace("karena", "kerana"));
    let client = MockClient::new();
    let out = ultrachat(paragraph, question, &client, &opts, &hook);
    for t in &out.conversation.turns {
        println!("{:?} indon={:?}: {}", t.role, t.indon, t.effective_content());
    }
    println!("\n{}", render(&out.conversation).unwrap());
    println!("client calls: {}", client.calls());
}
