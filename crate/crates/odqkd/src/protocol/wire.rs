//! Line-delimited record format shared between the network simulator and the
//! CLI.
//!
//! One JSON object per line, schema:
//!
//! ```text
//! {"round_id":0,
//!  "preparations":["H","D","A","V"],          // one BB84 symbol per user
//!  "bsm":["psi+","fail","psi-","psi+"],       // one relay result per user
//!  "comm_users":[0,1],
//!  "announced_bases":["Z","X"],               // one per communication user
//!  "announced_aux_symbols":["D",null]}        // one per auxiliary user; null = prepared Z
//! ```
//!
//! Symbol spellings are fixed: `"H"`, `"V"`, `"D"`, `"A"` for the BB84 states
//! and `"psi+"`, `"psi-"`, `"fail"` for relay announcements.

use std::io::{BufRead, Write};

use super::RoundRecord;

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        source: super::ProtocolError,
    },
}

/// Write records as one JSON object per line, in the order given.
pub fn write_records<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a RoundRecord>,
) -> Result<(), WireError> {
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read and validate a full record stream.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<RoundRecord>, WireError> {
    let mut records = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RoundRecord =
            serde_json::from_str(&line).map_err(|source| WireError::Parse {
                line: idx + 1,
                source,
            })?;
        record
            .validate()
            .map_err(|source| WireError::Invalid {
                line: idx + 1,
                source,
            })?;
        records.push(record);
    }
    Ok(records)
}
