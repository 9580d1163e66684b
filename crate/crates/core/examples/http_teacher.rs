//! Talk to a cross-encoder style scoring service over HTTP. A toy service
//! that scores by query-term overlap runs in a background thread.

use std::time::Duration;

use reformir::prelude::*;
use reformir::teacher::HttpTeacher;

fn serve(server: tiny_http::Server) {
    for mut req in server.incoming_requests() {
        let mut body = String::new();
        req.as_reader().read_to_string(&mut body).unwrap();
        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
        let query: Vec<String> = v["query"].as_str().unwrap().split_whitespace().map(str::to_lowercase).collect();
        let scores: Vec<f64> = v["documents"]
            .as_array()
            .unwrap()
            .iter()
            .map(|d| {
                let text = d["text"].as_str().unwrap().to_lowercase();
                2.0 * query.iter().filter(|t| text.contains(t.as_str())).count() as f64 - 2.0
            })
            .collect();
        let reply = serde_json::json!({ "scores": scores, "score_semantics": "raw" }).to_string();
        req.respond(tiny_http::Response::from_string(reply)).unwrap();
    }
}

fn main() {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}/score", server.server_addr().to_ip().unwrap());
    std::thread::spawn(move || serve(server));

    let index = Index::build(
        (0..60).map(|i| {
            let topic = ["solar power grid", "solar garden lights", "wind power", "garden hose"][i % 4];
            Document::new(format!("d{i:02}"), format!("{topic} note {}", i % 7))
        }),
        AnalyzerConfig::default(),
        Bm25Params::default(),
    )
    .unwrap();
    let reforms = ReformulationSet::new("q1", "solar power", ["solar grid".to_string(), "power garden".to_string()], "manual");
    let mut teacher = HttpTeacher::new(url, Duration::from_secs(5));
    let result = run_reformir(&index, "solar power", &reforms, &mut teacher, &LoopConfig { budget: 24, batch_size: 8, ..LoopConfig::default() });
    println!("failure: {:?}", result.failure);
    for s in result.ranking.iter().take(8) {
        println!("{} {:.3}", s.doc_id, s.score);
    }
}
