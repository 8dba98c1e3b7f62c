//! Generate a small synthetic corpus and show how its tokens break down.

use evidex::corpus::{generate_synthetic, mask_to_spans, SyntheticConfig, TokenKind};

fn main() -> evidex::Result<()> {
    let (corpus, lexicon) = generate_synthetic(&SyntheticConfig {
        n: 200,
        m: 50,
        ..SyntheticConfig::default()
    })?;
    println!(
        "{} documents, {} labeled, {} annotated",
        corpus.len(),
        corpus.num_labeled(),
        corpus.num_annotated()
    );

    let (mut evidence, mut confounder, mut background) = (0, 0, 0);
    for d in corpus.documents() {
        for t in &d.tokens {
            match lexicon.kind(t) {
                Some(TokenKind::Evidence(_)) => evidence += 1,
                Some(TokenKind::Confounder(_)) => confounder += 1,
                _ => background += 1,
            }
        }
    }
    println!("tokens: {evidence} evidence, {confounder} confounder, {background} background");

    let d = corpus
        .documents()
        .iter()
        .find(|d| d.evidence.is_some())
        .unwrap();
    println!("\n{} (label {:?})", d.id, d.label);
    println!("{}", d.tokens.join(" "));
    for [s, e] in mask_to_spans(d.evidence.as_ref().unwrap()) {
        println!("  evidence [{s}, {e}): {}", d.tokens[s..e].join(" "));
    }
    Ok(())
}
