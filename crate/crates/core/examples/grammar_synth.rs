//! A grammar-error multiple-choice item from a dependency parse.

use corpuskit::grammar_synth::{default_rules, make_item, parse_columns, ErrorSpec};

const PARSE: &str = "\
1\tIa\t2\tnsubj:pass
2\tdirobohkan\t0\troot
3\tpada\t4\tcase
4\t2005\t2\tobl
5\tdan\t6\tcc
6\tdigantikan\t2\tconj
7\tkepada\t8\tcase
8\tHypo-Arena\t6\tobl
9\tyang\t10\tnsubj
10\tsegar\t8\tacl
11\t.\t2\tpunct
";

fn main() {
    let sentence = parse_columns(PARSE).unwrap().remove(0);
    let rules = default_rules();
    let pool: Vec<ErrorSpec> = rules.iter().filter(|r| r.error_id <= 4).cloned().collect();
    let spec = pool.iter().find(|r| r.name == "kesalahan kata sendi").unwrap();
    for seed in 0..3 {
        let item = make_item(&sentence, spec, &pool, seed).unwrap();
        println!("{item}");
        println!("reconstructs: {}\n", item.reconstruct() == Some(sentence.text()));
    }
}
