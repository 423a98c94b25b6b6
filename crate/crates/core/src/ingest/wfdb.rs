//! Minimal WFDB reader: header (`.hea`) parsing and the 212 / 16 sample
//! formats.

use std::path::Path;

use thiserror::Error;

/// WFDB default sampling frequency when the record line omits it.
pub const DEFAULT_FS: f64 = 250.0;
/// WFDB default ADC gain (adu per mV) when absent or zero.
pub const DEFAULT_GAIN: f64 = 200.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WfdbError {
    #[error("malformed header line {line}: {reason}")]
    MalformedHeaderLine { line: usize, reason: String },
    #[error("unsupported WFDB format {0} (only 212 and 16)")]
    UnsupportedFormat(u32),
    #[error("truncated sample data: {0}")]
    TruncatedData(String),
    #[error("ADC gain is zero")]
    ZeroGain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WfdbFormat {
    F212,
    F16,
}

impl WfdbFormat {
    pub fn from_code(code: u32) -> Result<Self, WfdbError> {
        match code {
            212 => Ok(Self::F212),
            16 => Ok(Self::F16),
            other => Err(WfdbError::UnsupportedFormat(other)),
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Self::F212 => 212,
            Self::F16 => 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub filename: String,
    pub format: WfdbFormat,
    pub byte_offset: usize,
    /// adu per mV
    pub adc_gain: f64,
    /// adu
    pub baseline: f64,
    pub units: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WfdbHeader {
    pub record_name: String,
    pub n_signals: usize,
    pub fs: f64,
    pub n_samples: Option<usize>,
    pub signals: Vec<SignalSpec>,
}

fn malformed(line: usize, reason: impl Into<String>) -> WfdbError {
    WfdbError::MalformedHeaderLine {
        line,
        reason: reason.into(),
    }
}

pub fn parse_wfdb_header(text: &str) -> Result<WfdbHeader, WfdbError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, record) = lines.next().ok_or_else(|| malformed(1, "missing record line"))?;
    let tok: Vec<&str> = record.split_whitespace().collect();
    if tok.len() < 2 {
        return Err(malformed(ln, "record line needs a name and a signal count"));
    }
    if tok[0].contains('/') {
        return Err(malformed(ln, "multi-segment records are not supported"));
    }
    let n_signals: usize = tok[1]
        .parse()
        .map_err(|_| malformed(ln, format!("bad signal count `{}`", tok[1])))?;
    if n_signals == 0 {
        return Err(malformed(ln, "record declares no signals"));
    }
    let fs = match tok.get(2) {
        None => DEFAULT_FS,
        Some(t) => {
            let head = t.split(['/', '(']).next().unwrap_or("");
            let v: f64 = head
                .parse()
                .map_err(|_| malformed(ln, format!("bad sampling frequency `{t}`")))?;
            if !(v > 0.0) {
                return Err(malformed(ln, "sampling frequency must be positive"));
            }
            v
        }
    };
    let n_samples = tok
        .get(3)
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| malformed(ln, format!("bad sample count `{t}`")))
        })
        .transpose()?;

    let mut signals = Vec::with_capacity(n_signals);
    for (ln, line) in lines.by_ref() {
        if signals.len() == n_signals {
            break;
        }
        signals.push(parse_signal_line(ln, line)?);
    }
    if signals.len() != n_signals {
        return Err(malformed(
            ln,
            format!("expected {n_signals} signal lines, found {}", signals.len()),
        ));
    }
    Ok(WfdbHeader {
        record_name: tok[0].to_string(),
        n_signals,
        fs,
        n_samples,
        signals,
    })
}

fn parse_signal_line(ln: usize, line: &str) -> Result<SignalSpec, WfdbError> {
    let tok: Vec<&str> = line.split_whitespace().collect();
    if tok.len() < 2 {
        return Err(malformed(ln, "signal line needs a filename and a format"));
    }
    let fmt_tok = tok[1];
    let (fmt_part, byte_offset) = match fmt_tok.split_once('+') {
        Some((f, off)) => (
            f,
            off.parse::<usize>()
                .map_err(|_| malformed(ln, format!("bad byte offset in `{fmt_tok}`")))?,
        ),
        None => (fmt_tok, 0),
    };
    if fmt_part.contains('x') {
        return Err(malformed(ln, "samples-per-frame multipliers are not supported"));
    }
    if fmt_part.contains(':') {
        return Err(malformed(ln, "signal skew is not supported"));
    }
    let code: u32 = fmt_part
        .parse()
        .map_err(|_| malformed(ln, format!("bad format `{fmt_tok}`")))?;
    let format = WfdbFormat::from_code(code)?;

    let adc_zero = match tok.get(4) {
        Some(t) => t
            .parse::<f64>()
            .map_err(|_| malformed(ln, format!("bad adc zero `{t}`")))?,
        None => 0.0,
    };
    let (mut adc_gain, mut baseline, mut units) = (DEFAULT_GAIN, adc_zero, String::from("mV"));
    if let Some(g) = tok.get(2) {
        let (gain_base, unit) = match g.split_once('/') {
            Some((a, u)) => (a, Some(u)),
            None => (*g, None),
        };
        let (gain_str, base_str) = match gain_base.split_once('(') {
            Some((a, b)) => (
                a,
                Some(
                    b.strip_suffix(')')
                        .ok_or_else(|| malformed(ln, format!("unclosed baseline in `{g}`")))?,
                ),
            ),
            None => (gain_base, None),
        };
        let gain: f64 = gain_str
            .parse()
            .map_err(|_| malformed(ln, format!("bad adc gain `{g}`")))?;
        adc_gain = if gain == 0.0 { DEFAULT_GAIN } else { gain };
        if let Some(b) = base_str {
            baseline = b.parse().map_err(|_| malformed(ln, format!("bad baseline `{g}`")))?;
        }
        if let Some(u) = unit {
            units = u.to_string();
        }
    }
    let description = if tok.len() > 8 {
        tok[8..].join(" ")
    } else {
        String::new()
    };
    Ok(SignalSpec {
        filename: tok[0].to_string(),
        format,
        byte_offset,
        adc_gain,
        baseline,
        units,
        description,
    })
}

fn signext12(v: u16) -> i32 {
    let v = i32::from(v & 0x0FFF);
    if v & 0x800 != 0 {
        v - 0x1000
    } else {
        v
    }
}

/// Decodes an interleaved sample stream into one vector per signal.
///
/// Format 212 packs two 12-bit two's-complement samples into three bytes;
/// a trailing two-byte group carries a single final sample. Format 16 is
/// little-endian signed 16-bit.
pub fn decode_wfdb_samples(bytes: &[u8], format: WfdbFormat, n_signals: usize) -> Result<Vec<Vec<i32>>, WfdbError> {
    if n_signals == 0 {
        return Err(WfdbError::TruncatedData("zero signals".into()));
    }
    let flat: Vec<i32> = match format {
        WfdbFormat::F212 => {
            if bytes.len() % 3 == 1 {
                return Err(WfdbError::TruncatedData(format!(
                    "{} bytes is not a whole number of 212 sample groups",
                    bytes.len()
                )));
            }
            let mut out = Vec::with_capacity(bytes.len() * 2 / 3 + 1);
            let mut chunks = bytes.chunks_exact(3);
            for c in &mut chunks {
                let (b0, b1, b2) = (u16::from(c[0]), u16::from(c[1]), u16::from(c[2]));
                out.push(signext12(((b1 & 0x0F) << 8) | b0));
                out.push(signext12(((b1 & 0xF0) << 4) | b2));
            }
            if let [b0, b1] = chunks.remainder() {
                out.push(signext12(((u16::from(*b1) & 0x0F) << 8) | u16::from(*b0)));
            }
            out
        }
        WfdbFormat::F16 => {
            if !bytes.len().is_multiple_of(2 * n_signals) {
                return Err(WfdbError::TruncatedData(format!(
                    "{} bytes is not a multiple of {} for format 16",
                    bytes.len(),
                    2 * n_signals
                )));
            }
            bytes
                .chunks_exact(2)
                .map(|c| i32::from(i16::from_le_bytes([c[0], c[1]])))
                .collect()
        }
    };
    if !flat.len().is_multiple_of(n_signals) {
        return Err(WfdbError::TruncatedData(format!(
            "{} samples do not split evenly over {n_signals} signals",
            flat.len()
        )));
    }
    let mut out = vec![Vec::with_capacity(flat.len() / n_signals); n_signals];
    for (i, v) in flat.into_iter().enumerate() {
        out[i % n_signals].push(v);
    }
    Ok(out)
}

/// Packs a sample stream as format 212. Values are truncated to 12 bits.
pub fn encode_format212(samples: &[i32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 3 / 2 + 2);
    for pair in samples.chunks(2) {
        let s1 = (pair[0] & 0x0FFF) as u16;
        out.push((s1 & 0xFF) as u8);
        match pair.get(1) {
            Some(&v) => {
                let s2 = (v & 0x0FFF) as u16;
                out.push((((s2 >> 4) & 0xF0) | (s1 >> 8)) as u8);
                out.push((s2 & 0xFF) as u8);
            }
            None => out.push((s1 >> 8) as u8),
        }
    }
    out
}

pub fn encode_format16(samples: &[i32]) -> Vec<u8> {
    samples.iter().flat_map(|&v| (v as i16).to_le_bytes()).collect()
}

/// `(adc - baseline) / gain`, in mV.
pub fn adc_to_physical(adc: &[i32], gain: f64, baseline: f64) -> Result<Vec<f64>, WfdbError> {
    if gain == 0.0 {
        return Err(WfdbError::ZeroGain);
    }
    Ok(adc.iter().map(|&a| (f64::from(a) - baseline) / gain).collect())
}

/// Reads every signal of a record in physical units, given the `.hea` path.
pub fn read_wfdb_record(hea: &Path) -> Result<(WfdbHeader, Vec<Vec<f64>>), super::IngestError> {
    use super::IngestError;
    let text = std::fs::read_to_string(hea).map_err(|e| IngestError::io(hea, e))?;
    let header = parse_wfdb_header(&text)?;
    let dir = hea.parent().unwrap_or_else(|| Path::new("."));

    let mut physical: Vec<Option<Vec<f64>>> = vec![None; header.n_signals];
    // signals sharing a file are interleaved in declaration order
    let mut files: Vec<(&str, Vec<usize>)> = Vec::new();
    for (i, s) in header.signals.iter().enumerate() {
        match files.iter_mut().find(|(f, _)| *f == s.filename) {
            Some((_, v)) => v.push(i),
            None => files.push((&s.filename, vec![i])),
        }
    }
    for (file, members) in files {
        let first = &header.signals[members[0]];
        if members.iter().any(|&m| header.signals[m].format != first.format) {
            return Err(IngestError::FormatMismatch(format!(
                "signals in {file} use different formats"
            )));
        }
        let path = dir.join(file);
        let bytes = std::fs::read(&path).map_err(|e| IngestError::io(&path, e))?;
        let body = bytes
            .get(first.byte_offset..)
            .ok_or_else(|| IngestError::Wfdb(WfdbError::TruncatedData(format!("offset beyond end of {file}"))))?;
        let decoded = decode_wfdb_samples(body, first.format, members.len())?;
        for (adc, &m) in decoded.into_iter().zip(&members) {
            let mut adc = adc;
            if let Some(n) = header.n_samples {
                if adc.len() < n {
                    return Err(IngestError::Wfdb(WfdbError::TruncatedData(format!(
                        "{file}: {} samples, header declares {n}",
                        adc.len()
                    ))));
                }
                adc.truncate(n);
            }
            let s = &header.signals[m];
            physical[m] = Some(adc_to_physical(&adc, s.adc_gain, s.baseline)?);
        }
    }
    Ok((header, physical.into_iter().map(|v| v.unwrap_or_default()).collect()))
}
