//! Building a QA-choice prompt and recovering items from a messy reply.

use std::collections::BTreeMap;

use corpuskit::synthgen::{build_prompt, parse_structured_qa, QaSchema, Recipe};

fn main() {
    let inputs = BTreeMap::from([(
        "paragraph".to_string(),
        "Sungai Rajang ialah sungai terpanjang di Malaysia.".to_string(),
    )]);
    let prompt = build_prompt(Recipe::QaChoice, &inputs).unwrap();
    println!("{}\n", prompt[0].content);

    let reply = "Baiklah, ini soalannya:\n{'qa': [\
        {'question': 'Sungai terpanjang di Malaysia?', 'A': 'Pahang', 'B': 'Rajang', 'C': 'Kinabatangan', 'D': 'Perak', 'answer': 'B'},\
        {'question': 'Soalan rosak', 'A': 'x', 'answer': 'A'}]}\nSemoga membantu!";
    let qa = parse_structured_qa(reply, QaSchema::QaChoice).unwrap();
    println!("{}", serde_json::to_string_pretty(&qa).unwrap());
}
