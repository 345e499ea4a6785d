use crate::error::{CscError, Result};
use crate::tensor::Tensor3;

/// Clamp to `[0, 255]` and round half away from zero.
pub fn quantize(v: f32) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}

/// `P5` for one channel, `P6` for three.
pub fn encode_pnm(t: &Tensor3) -> Result<Vec<u8>> {
    let magic = match t.channels() {
        1 => "P5",
        3 => "P6",
        c => {
            return Err(CscError::domain(format!(
                "PGM/PPM need 1 or 3 channels, got {c}"
            )))
        }
    };
    let mut out = format!("{magic}\n{} {}\n255\n", t.width(), t.height()).into_bytes();
    out.extend(t.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

/// Binary PGM/PPM with maxval ≤ 255; values are scaled to 0-255.
pub fn decode_pnm(bytes: &[u8]) -> Result<Tensor3> {
    let mut pos = 0;
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(CscError::format(0, "expected binary PGM (P5) or PPM (P6)")),
    };
    pos += 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(CscError::format(pos, format!("expected header field {}", i + 1)));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CscError::format(start, "header number out of range"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(CscError::format(2, "zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(CscError::format(pos, format!("unsupported maxval {maxval}")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(CscError::format(pos, "missing whitespace after header"));
    }
    pos += 1;
    let count = width * height * channels;
    let payload = bytes
        .get(pos..pos + count)
        .ok_or_else(|| CscError::format(bytes.len(), "truncated pixel data"))?;
    let scale = 255.0 / maxval as f32;
    let data = payload.iter().map(|&b| f32::from(b) * scale).collect();
    Tensor3::from_vec(height, width, channels, data)
}
