// Byte-offset addressing on a small store: seek anywhere, realign to the
// next line, read whole records.

use seqsample::line_store::ByteAddressedFile;

pub fn run_example() -> seqsample::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("abc.txt");
    std::fs::write(&path, "alpha\nbravo\ncharlie\n")?;

    let mut file = ByteAddressedFile::open(&path)?;
    println!("n_f = {} bytes", file.n_f());

    for p_b in [0, 3, 6, 12, file.n_f()] {
        let cursor = file.seek(p_b)?;
        let header = file.advance_to_next_header(cursor)?;
        let (record, _) = file.read_line(header)?;
        println!(
            "p_b = {p_b:>2} -> line at {:>2}{} : {}",
            header.position,
            if header.wrapped { " (wrapped)" } else { "" },
            record.as_str()
        );
    }

    let index = file.line_index()?;
    println!("headers: {:?}", index.headers());
    Ok(())
}

#[allow(dead_code)]
fn main() -> seqsample::Result<()> {
    run_example()
}
