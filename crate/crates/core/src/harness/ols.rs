use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::NormalEquations;
use crate::line_store::{parse_fields_into, ByteAddressedFile};

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkedOls {
    pub coefficients: Vec<f64>,
    pub rows: u64,
    pub blocks: u64,
}

/// Least squares over a response-first store, `block_size` rows at a time.
/// Each block is read into memory, reduced to its own normal equations and
/// merged into the running total; the system is solved once at the end.
pub fn chunked_ols(path: &Path, block_size: usize) -> Result<ChunkedOls> {
    if block_size == 0 {
        return Err(Error::config("block size must be positive"));
    }
    let mut file = ByteAddressedFile::open(path)?;
    let mut total: Option<NormalEquations> = None;
    let mut block: Vec<Vec<f64>> = Vec::with_capacity(block_size);
    let mut blocks = 0u64;
    let mut fields = Vec::new();

    fn flush(block: &mut Vec<Vec<f64>>, total: &mut Option<NormalEquations>, blocks: &mut u64) -> Result<()> {
        if block.is_empty() {
            return Ok(());
        }
        let p = block[0].len() - 1;
        let mut ne = NormalEquations::new(p);
        for row in block.iter() {
            ne.push(row)?;
        }
        match total {
            Some(t) => t.merge(&ne)?,
            None => *total = Some(ne),
        }
        *blocks += 1;
        block.clear();
        Ok(())
    }

    file.sequential_scan(|rec| {
        parse_fields_into(&rec.raw, rec.origin_offset, &mut fields)?;
        if fields.len() < 2 {
            return Err(Error::Malformed("regression rows need a response and a regressor".into()));
        }
        block.push(fields.clone());
        if block.len() == block_size {
            flush(&mut block, &mut total, &mut blocks)?;
        }
        Ok(())
    })?;
    flush(&mut block, &mut total, &mut blocks)?;
    let total = total.ok_or(Error::EmptyStore)?;
    Ok(ChunkedOls {
        coefficients: total.solve()?,
        rows: total.rows(),
        blocks,
    })
}
