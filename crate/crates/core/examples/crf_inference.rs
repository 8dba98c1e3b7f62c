//! Exact inference on a hand-built potential table.

use evidex::crf::{PotentialTable, TAG_E};

fn main() -> evidex::Result<()> {
    let tokens = ["the", "rates", "were", "sharply", "cut", "today"];
    // Per-token [O, E] scores.
    let emissions = vec![
        [0.5, -1.0],
        [0.0, 0.8],
        [0.3, -0.2],
        [0.0, 1.1],
        [0.0, 1.4],
        [0.6, -0.9],
    ];
    let transitions = [[0.4, -0.6], [-0.3, 0.7]];
    let pt = PotentialTable::new(emissions, transitions, [0.0, -0.5])?;

    let m = pt.marginals();
    println!("log Z = {:.4}", m.log_partition);
    for (t, word) in tokens.iter().enumerate() {
        println!("{word:>8}  P(E) = {:.3}", m.node[t][TAG_E]);
    }

    let best = pt.viterbi();
    println!("viterbi {best:?}  score {:.4}", pt.sequence_score(&best));
    println!(
        "P(best path) = {:.3}",
        (pt.sequence_score(&best) - m.log_partition).exp()
    );
    let marked: Vec<&str> = tokens
        .iter()
        .zip(pt.decode_mask())
        .filter(|(_, e)| *e)
        .map(|(w, _)| *w)
        .collect();
    println!("evidence: {}", marked.join(" "));
    Ok(())
}
