//! Fleiss' kappa for three annotators labeling five sentences.
//!
//! cargo run --example annotator_agreement

use attrib::evaluation::{fleiss_kappa, ratings_to_table};

fn main() -> attrib::Result<()> {
    let ratings: Vec<Vec<String>> = [
        ["deforestation", "deforestation", "deforestation"],
        ["pollution", "pollution", "NONE"],
        ["damming", "damming", "damming"],
        ["NONE", "NONE", "NONE"],
        ["corruption", "government_inaction", "corruption"],
    ]
    .iter()
    .map(|item| item.iter().map(|s| s.to_string()).collect())
    .collect();

    let (categories, table) = ratings_to_table(&ratings);
    println!("{}", categories.join("\t"));
    for row in &table {
        println!(
            "{}",
            row.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join("\t")
        );
    }
    match fleiss_kappa(&table)? {
        Some(k) => println!("kappa = {k:.4}"),
        None => println!("kappa undefined"),
    }
    Ok(())
}
