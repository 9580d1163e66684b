//! Write a TREC run, read it back, and report nDCG/Recall with a paired
//! t-test between two systems.

use std::collections::BTreeMap;

use reformir::eval::{read_run, report, write_run, ReportOptions};
use reformir::prelude::*;

fn main() {
    let qrels = Qrels::read("1 0 a 2\n1 0 b 1\n1 0 c 0\n2 0 x 1\n2 0 y 3\n3 0 m 1\n".as_bytes()).unwrap();
    let list = |qid: &str, ids: &[&str]| {
        RankedList::from_scores(qid, ids.iter().enumerate().map(|(i, d)| (d.to_string(), 10.0 - i as f64)).collect())
    };
    let good = vec![list("1", &["a", "b", "c"]), list("2", &["y", "x"]), list("3", &["m"])];
    let weak = vec![list("1", &["c", "b", "a"]), list("2", &["x", "z"]), list("3", &["n", "m"])];

    let mut buf = Vec::new();
    write_run(&mut buf, &good, "good").unwrap();
    print!("{}", String::from_utf8_lossy(&buf));
    let good: BTreeMap<String, RankedList> = read_run(buf.as_slice()).unwrap();
    let weak: BTreeMap<String, RankedList> = weak.into_iter().map(|l| (l.query_id.clone(), l)).collect();

    let options = ReportOptions { cutoffs: vec![2, 10], ..ReportOptions::default() };
    let table = report(&[("good".into(), good), ("weak".into(), weak)], &qrels, &[(0, 1)], &options).unwrap();
    println!("{}", table.render_text());
    let t = paired_ttest(&[0.9, 0.8, 0.7], &[0.5, 0.6, 0.2]).unwrap();
    println!("paired t = {:.3}, p = {:.4}, df = {}", t.t, t.p, t.df);
}
