use std::fmt::Write as _;

use super::{sort_peaks, Peak, Spectrum};
use crate::{Error, Result};

/// Parses every `BEGIN IONS` ... `END IONS` block in `text`.
///
/// Only `PEPMASS` (first token), `TITLE`, and `mz intensity` peak lines are
/// interpreted. Other `KEY=VALUE` lines are ignored, inside or outside a block.
/// Both `\n` and `\r\n` line endings are accepted.
pub fn parse_mgf(text: &str) -> Result<Vec<Spectrum>> {
    let mut out = Vec::new();
    let mut block: Option<BlockBuilder> = None;
    let mut ordinal = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if line.eq_ignore_ascii_case("BEGIN IONS") {
            if let Some(open) = &block {
                return Err(Error::Mgf {
                    block: open.ordinal,
                    line: line_no,
                    message: format!(
                        "BEGIN IONS before END IONS (block opened at line {})",
                        open.start_line
                    ),
                });
            }
            ordinal += 1;
            block = Some(BlockBuilder::new(ordinal, line_no));
            continue;
        }
        if line.eq_ignore_ascii_case("END IONS") {
            let Some(done) = block.take() else {
                return Err(Error::Mgf {
                    block: ordinal,
                    line: line_no,
                    message: "END IONS without a matching BEGIN IONS".into(),
                });
            };
            out.push(done.finish()?);
            continue;
        }

        match block.as_mut() {
            Some(b) => b.feed(line, line_no)?,
            None => {
                // Global parameters (e.g. MASS=Monoisotopic) may precede the first block.
                if !line.contains('=') {
                    return Err(Error::Mgf {
                        block: ordinal,
                        line: line_no,
                        message: format!("unexpected content outside a block: '{line}'"),
                    });
                }
            }
        }
    }

    if let Some(open) = block {
        return Err(Error::Mgf {
            block: open.ordinal,
            line: open.start_line,
            message: "unterminated block (missing END IONS)".into(),
        });
    }
    Ok(out)
}

struct BlockBuilder {
    ordinal: usize,
    start_line: usize,
    title: Option<String>,
    precursor_mz: Option<f64>,
    peaks: Vec<Peak>,
}

impl BlockBuilder {
    fn new(ordinal: usize, start_line: usize) -> Self {
        BlockBuilder {
            ordinal,
            start_line,
            title: None,
            precursor_mz: None,
            peaks: Vec::new(),
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Mgf {
            block: self.ordinal,
            line,
            message: message.into(),
        }
    }

    fn feed(&mut self, line: &str, line_no: usize) -> Result<()> {
        if let Some((key, value)) = line.split_once('=') {
            let key = key.trim();
            if key.eq_ignore_ascii_case("PEPMASS") {
                let first = value.split_whitespace().next().unwrap_or("");
                let mz: f64 = first
                    .parse()
                    .map_err(|_| self.err(line_no, format!("PEPMASS value '{first}' is not a number")))?;
                if !(mz.is_finite() && mz > 0.0) {
                    return Err(self.err(line_no, format!("PEPMASS {mz} must be finite and > 0")));
                }
                self.precursor_mz = Some(mz);
            } else if key.eq_ignore_ascii_case("TITLE") {
                self.title = Some(value.trim().to_string());
            }
            return Ok(());
        }

        let mut tokens = line.split_whitespace();
        let (Some(mz_tok), Some(int_tok)) = (tokens.next(), tokens.next()) else {
            return Err(self.err(line_no, format!("peak line '{line}' needs m/z and intensity")));
        };
        let parse = |tok: &str, what: &str| -> Result<f64> {
            tok.parse::<f64>()
                .map_err(|_| self.err(line_no, format!("{what} '{tok}' is not a number")))
        };
        let peak = Peak::new(parse(mz_tok, "m/z")?, parse(int_tok, "intensity")?);
        if !peak.is_valid() {
            return Err(self.err(
                line_no,
                format!(
                    "peak ({}, {}) needs finite m/z > 0 and finite intensity >= 0",
                    peak.mz, peak.intensity
                ),
            ));
        }
        self.peaks.push(peak);
        Ok(())
    }

    fn finish(mut self) -> Result<Spectrum> {
        let Some(precursor_mz) = self.precursor_mz else {
            return Err(self.err(self.start_line, "missing PEPMASS"));
        };
        sort_peaks(&mut self.peaks);
        Ok(Spectrum {
            id: self
                .title
                .unwrap_or_else(|| format!("spectrum_{}", self.ordinal)),
            precursor_mz,
            peaks: self.peaks,
            label: None,
        })
    }
}

/// Writes spectra as MGF. Numbers use the shortest representation that
/// parses back to the same `f64`. Labels are not part of MGF and are dropped.
pub fn serialize_mgf(spectra: &[Spectrum]) -> String {
    let mut out = String::new();
    for (i, s) in spectra.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str("BEGIN IONS\n");
        let _ = writeln!(out, "TITLE={}", s.id);
        let _ = writeln!(out, "PEPMASS={}", s.precursor_mz);
        for p in &s.peaks {
            let _ = writeln!(out, "{} {}", p.mz, p.intensity);
        }
        out.push_str("END IONS\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_block() {
        let s = parse_mgf("BEGIN IONS\nPEPMASS=300.1\n100.0 5.0\nEND IONS").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].precursor_mz, 300.1);
        assert_eq!(s[0].peaks, vec![Peak::new(100.0, 5.0)]);
        assert_eq!(s[0].id, "spectrum_1");
    }

    #[test]
    fn peaks_sorted() {
        let s = parse_mgf("BEGIN IONS\nPEPMASS=300\n200.0 1.0\n100.0 2.0\nEND IONS\n").unwrap();
        assert_eq!(s[0].peaks, vec![Peak::new(100.0, 2.0), Peak::new(200.0, 1.0)]);
    }

    #[test]
    fn missing_pepmass_names_block_and_line() {
        let text = "BEGIN IONS\nPEPMASS=1\nEND IONS\n\nBEGIN IONS\nTITLE=b\n1 1\nEND IONS\n";
        match parse_mgf(text).unwrap_err() {
            Error::Mgf { block, line, message } => {
                assert_eq!(block, 2);
                assert_eq!(line, 5);
                assert!(message.contains("PEPMASS"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn pepmass_with_intensity_takes_first_token() {
        let s = parse_mgf("BEGIN IONS\nPEPMASS=412.5 10000\nCHARGE=2+\nEND IONS").unwrap();
        assert_eq!(s[0].precursor_mz, 412.5);
        assert!(s[0].peaks.is_empty());
    }

    #[test]
    fn crlf_and_title() {
        let s = parse_mgf("BEGIN IONS\r\nTITLE=scan=7\r\nPEPMASS=100\r\n50 1\r\nEND IONS\r\n").unwrap();
        assert_eq!(s[0].id, "scan=7");
        assert_eq!(s[0].peaks.len(), 1);
    }

    #[test]
    fn non_numeric_peak() {
        let err = parse_mgf("BEGIN IONS\nPEPMASS=100\n50 abc\nEND IONS").unwrap_err();
        assert!(matches!(err, Error::Mgf { block: 1, line: 3, .. }), "{err}");
    }

    #[test]
    fn unterminated() {
        let err = parse_mgf("BEGIN IONS\nPEPMASS=100\n50 1\n").unwrap_err();
        assert!(err.to_string().contains("unterminated"));
    }

    #[test]
    fn serialize_examples() {
        assert_eq!(serialize_mgf(&[]), "");
        let s = Spectrum::new("a", 300.1, vec![Peak::new(100.0, 5.0)]);
        let text = serialize_mgf(&[s.clone()]);
        assert!(text.contains("PEPMASS=300.1\n"));
        assert!(text.contains("\n100 5\n"));
        assert_eq!(parse_mgf(&text).unwrap(), vec![s]);
    }
}
