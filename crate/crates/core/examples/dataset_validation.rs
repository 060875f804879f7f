//! Parses a small annotated dataset and lists every score outside its
//! variable's declared range. The strict loader rejects the same input at
//! the first violation.

use emoreg::data::{parse_dataset, parse_tsv, validate, AnnotationSchema};

const SRC: &str = "text\tvalence\tarousal\tdominance
A calm afternoon by the lake\t7.2\t2.1\t6.0
Sirens all night\t2.0\t9.6\t3.1
An impossible rating\t0.5\t5.0\t10.0
";

fn main() -> emoreg::Result<()> {
    let ds = parse_tsv(SRC, &AnnotationSchema::vad(), "inline")?;
    println!("{} records, variables {:?}", ds.len(), ds.schema.names());
    let violations = validate(&ds);
    for v in &violations {
        println!("  {v}");
    }
    if violations.is_empty() {
        println!("all scores within range");
    }
    if let Err(e) = parse_dataset(SRC, &AnnotationSchema::vad(), "inline") {
        println!("strict load: {e}");
    }
    Ok(())
}
