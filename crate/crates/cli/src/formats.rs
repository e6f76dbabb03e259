//! Binary stack and label containers, plus atomic file output.
//!
//! Both containers share a little-endian header:
//! magic (4 bytes), version u16, sample rate u32, hop u32, frames u32,
//! classes u32, head count u8 (always 3). Head planes follow in the order
//! onset, frame, offset.

use std::fs;
use std::io::Write;
use std::path::Path;

use noteem_core::labeler::{HeadLabels, LabelGrid, Provenance};
use noteem_core::notes::PITCH_COUNT;
use noteem_core::roll::{ActivationStack, ClassLayout, Head};
use noteem_core::{Error, FrameClock, Matrix, Result};

pub const STACK_MAGIC: &[u8; 4] = b"NEM1";
pub const LABEL_MAGIC: &[u8; 4] = b"NEL1";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4 + 4 + 1;
const HEADS: u8 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Header {
    clock: FrameClock,
    frames: usize,
    classes: usize,
}

fn write_header(out: &mut Vec<u8>, magic: &[u8; 4], h: &Header) -> Result<()> {
    let frames = u32::try_from(h.frames).map_err(|_| Error::format("header", "frame count exceeds u32"))?;
    let classes = u32::try_from(h.classes).map_err(|_| Error::format("header", "class count exceeds u32"))?;
    out.extend_from_slice(magic);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&h.clock.sample_rate().to_le_bytes());
    out.extend_from_slice(&h.clock.hop().to_le_bytes());
    out.extend_from_slice(&frames.to_le_bytes());
    out.extend_from_slice(&classes.to_le_bytes());
    out.push(HEADS);
    Ok(())
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4-byte slice"))
}

fn read_header(bytes: &[u8], magic: &[u8; 4], kind: &'static str) -> Result<(Header, ClassLayout)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(kind, format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != magic {
        return Err(Error::format(kind, format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..4]))));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::format(kind, format!("unsupported version {version}")));
    }
    let clock = FrameClock::new(u32_at(bytes, 6), u32_at(bytes, 10)).map_err(|e| Error::format(kind, e.to_string()))?;
    let frames = u32_at(bytes, 14) as usize;
    let classes = u32_at(bytes, 18) as usize;
    if bytes[22] != HEADS {
        return Err(Error::format(kind, format!("expected 3 heads, found {}", bytes[22])));
    }
    if classes == 0 || classes % PITCH_COUNT != 0 {
        return Err(Error::format(kind, format!("class count {classes} is not a multiple of {PITCH_COUNT}")));
    }
    let layout = ClassLayout::new(classes / PITCH_COUNT).map_err(|e| Error::format(kind, e.to_string()))?;
    Ok((Header { clock, frames, classes }, layout))
}

fn expect_len(bytes: &[u8], expected: usize, kind: &'static str) -> Result<()> {
    if bytes.len() != expected {
        return Err(Error::format(
            kind,
            format!("payload is {} bytes, header implies {}", bytes.len(), expected),
        ));
    }
    Ok(())
}

pub fn encode_stack(stack: &ActivationStack) -> Result<Vec<u8>> {
    let (frames, classes) = (stack.frames(), stack.classes());
    let mut out = Vec::with_capacity(HEADER_LEN + 3 * frames * classes * 4);
    write_header(&mut out, STACK_MAGIC, &Header { clock: stack.clock, frames, classes })?;
    for head in Head::ALL {
        for v in stack.head(head).as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_stack(bytes: &[u8]) -> Result<ActivationStack> {
    const KIND: &str = "stack";
    let (h, layout) = read_header(bytes, STACK_MAGIC, KIND)?;
    let cells = h.frames.checked_mul(h.classes).ok_or_else(|| Error::format(KIND, "size overflow"))?;
    expect_len(bytes, HEADER_LEN + 3 * cells * 4, KIND)?;
    let plane = |i: usize| {
        let start = HEADER_LEN + i * cells * 4;
        let data = bytes[start..start + cells * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        Matrix::from_vec(h.frames, h.classes, data).expect("plane size checked")
    };
    ActivationStack::new(plane(0), plane(1), plane(2), h.clock, layout)
        .map_err(|e| Error::format(KIND, e.to_string()))
}

fn pack_bits(values: impl Iterator<Item = bool>, cells: usize, out: &mut Vec<u8>) {
    let start = out.len();
    out.resize(start + cells.div_ceil(8), 0);
    for (i, v) in values.enumerate() {
        if v {
            out[start + i / 8] |= 1 << (i % 8);
        }
    }
}

fn unpack_bits(bytes: &[u8], cells: usize, kind: &'static str) -> Result<Vec<u8>> {
    let out: Vec<u8> = (0..cells).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect();
    if cells % 8 != 0 && bytes[cells / 8] >> (cells % 8) != 0 {
        return Err(Error::format(kind, "nonzero padding bits"));
    }
    Ok(out)
}

/// Per head: target bits, mask bits (1 = counts toward the loss), provenance codes.
pub fn encode_labels(grid: &LabelGrid) -> Result<Vec<u8>> {
    let (frames, classes) = (grid.frames(), grid.classes());
    let cells = frames * classes;
    let mut out = Vec::with_capacity(HEADER_LEN + 3 * (2 * cells.div_ceil(8) + cells));
    write_header(&mut out, LABEL_MAGIC, &Header { clock: grid.clock, frames, classes })?;
    for head in Head::ALL {
        let h = grid.head(head);
        pack_bits(h.target.as_slice().iter().map(|&v| v != 0), cells, &mut out);
        pack_bits(h.provenance.as_slice().iter().map(|p| !p.is_masked()), cells, &mut out);
        out.extend(h.provenance.as_slice().iter().map(|p| p.code()));
    }
    Ok(out)
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelGrid> {
    const KIND: &str = "label";
    let (h, layout) = read_header(bytes, LABEL_MAGIC, KIND)?;
    let cells = h.frames.checked_mul(h.classes).ok_or_else(|| Error::format(KIND, "size overflow"))?;
    let bits = cells.div_ceil(8);
    let per_head = 2 * bits + cells;
    expect_len(bytes, HEADER_LEN + 3 * per_head, KIND)?;
    let mut heads = Vec::with_capacity(3);
    for i in 0..3 {
        let base = HEADER_LEN + i * per_head;
        let target = unpack_bits(&bytes[base..base + bits], cells, KIND)?;
        let mask = unpack_bits(&bytes[base + bits..base + 2 * bits], cells, KIND)?;
        let prov = bytes[base + 2 * bits..base + per_head]
            .iter()
            .map(|&c| Provenance::from_code(c).ok_or_else(|| Error::format(KIND, format!("unknown provenance code {c}"))))
            .collect::<Result<Vec<_>>>()?;
        let plane = |v: Vec<u8>| Matrix::from_vec(h.frames, h.classes, v).expect("plane size checked");
        let prov = Matrix::from_vec(h.frames, h.classes, prov).expect("plane size checked");
        let head = HeadLabels::from_planes(plane(target), &plane(mask), prov).map_err(|e| Error::format(KIND, e.to_string()))?;
        heads.push(head);
    }
    let offset = heads.pop().expect("three heads");
    let frame = heads.pop().expect("three heads");
    let onset = heads.pop().expect("three heads");
    Ok(LabelGrid {
        onset,
        frame,
        offset,
        clock: h.clock,
        layout,
    })
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
