use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{TraceError, TraceFormat, TraceItem, Window};

pub const BINARY_MAGIC: &[u8; 8] = b"RAINTRC1";
pub const BINARY_VERSION: u32 = 1;
pub const BINARY_HEADER_LEN: usize = 16;
pub const BINARY_RECORD_LEN: usize = 16;

/// Pull-based reader over either trace format, with the skip/limit window
/// already applied.
pub struct TraceReader<R> {
    inner: R,
    format: TraceFormat,
    limit: Option<u64>,
    position: u64,
    byte_offset: u64,
    line: usize,
    line_buf: String,
}

/// A trace stream backed by a file on disk.
pub type TraceStream = TraceReader<BufReader<File>>;

/// Opens `path`, validates the header and positions the stream after
/// `window.skip` items.
pub fn open_trace(
    path: impl AsRef<Path>,
    format: TraceFormat,
    window: Window,
) -> Result<TraceStream, TraceError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| TraceError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    TraceReader::new(BufReader::with_capacity(1 << 16, file), format, window)
}

/// Reads the whole windowed trace into memory.
pub fn load_trace(
    path: impl AsRef<Path>,
    format: TraceFormat,
    window: Window,
) -> Result<Vec<TraceItem>, TraceError> {
    open_trace(path, format, window)?.collect()
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(inner: R, format: TraceFormat, window: Window) -> Result<Self, TraceError> {
        let mut reader = Self {
            inner,
            format,
            limit: None,
            position: 0,
            byte_offset: 0,
            line: 0,
            line_buf: String::new(),
        };
        if format == TraceFormat::Binary {
            reader.read_header()?;
        }
        for _ in 0..window.skip {
            if reader.read_raw()?.is_none() {
                break;
            }
        }
        reader.limit = window.limit;
        Ok(reader)
    }

    pub fn format(&self) -> TraceFormat {
        self.format
    }

    /// Items yielded so far (after the skip).
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Next item in file order, or `None` at end of stream or window.
    pub fn next_item(&mut self) -> Result<Option<TraceItem>, TraceError> {
        if self.limit.is_some_and(|l| self.position >= l) {
            return Ok(None);
        }
        let item = self.read_raw()?;
        if item.is_some() {
            self.position += 1;
        }
        Ok(item)
    }

    fn read_header(&mut self) -> Result<(), TraceError> {
        let mut header = [0u8; BINARY_HEADER_LEN];
        let got = read_full(&mut self.inner, &mut header)?;
        if got < BINARY_HEADER_LEN {
            return Err(TraceError::Header(format!(
                "expected {BINARY_HEADER_LEN} header bytes, found {got}"
            )));
        }
        if &header[..8] != BINARY_MAGIC {
            return Err(TraceError::Header("bad magic (expected RAINTRC1)".into()));
        }
        let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if version != BINARY_VERSION {
            return Err(TraceError::Header(format!("unsupported version {version}")));
        }
        let reserved = u32::from_le_bytes(header[12..16].try_into().unwrap());
        if reserved != 0 {
            return Err(TraceError::Header(format!(
                "reserved header field is {reserved:#x}, expected 0"
            )));
        }
        self.byte_offset = BINARY_HEADER_LEN as u64;
        Ok(())
    }

    fn read_raw(&mut self) -> Result<Option<TraceItem>, TraceError> {
        match self.format {
            TraceFormat::Binary => self.read_binary_record(),
            TraceFormat::Text => self.read_text_line(),
        }
    }

    fn read_binary_record(&mut self) -> Result<Option<TraceItem>, TraceError> {
        let mut rec = [0u8; BINARY_RECORD_LEN];
        let offset = self.byte_offset;
        match read_full(&mut self.inner, &mut rec)? {
            0 => return Ok(None),
            BINARY_RECORD_LEN => {}
            _ => return Err(TraceError::Truncated { offset }),
        }
        self.byte_offset += BINARY_RECORD_LEN as u64;
        let address = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let size = u32::from_le_bytes(rec[8..12].try_into().unwrap());
        let flags = u32::from_le_bytes(rec[12..16].try_into().unwrap());
        if flags != 0 {
            return Err(TraceError::NonzeroFlags { offset, flags });
        }
        if size == 0 {
            return Err(TraceError::ZeroSizeRecord { offset });
        }
        Ok(Some(TraceItem { address, size }))
    }

    fn read_text_line(&mut self) -> Result<Option<TraceItem>, TraceError> {
        loop {
            self.line_buf.clear();
            if self.inner.read_line(&mut self.line_buf)? == 0 {
                return Ok(None);
            }
            self.line += 1;
            let text = self.line_buf.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            return parse_text_line(text, self.line).map(Some);
        }
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<TraceItem, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_item().transpose()
    }
}

fn parse_text_line(text: &str, line: usize) -> Result<TraceItem, TraceError> {
    let err = |message: String| TraceError::Parse { line, message };
    let mut fields = text.split_whitespace();
    let (Some(addr), Some(size), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(err(format!("expected `<hex-address> <size>`, got `{text}`")));
    };
    let digits = addr
        .strip_prefix("0x")
        .or_else(|| addr.strip_prefix("0X"))
        .unwrap_or(addr);
    let address =
        u64::from_str_radix(digits, 16).map_err(|e| err(format!("bad address `{addr}`: {e}")))?;
    let size: u32 = size
        .parse()
        .map_err(|e| err(format!("bad size `{size}`: {e}")))?;
    if size == 0 {
        return Err(err("instruction size must be >= 1".into()));
    }
    Ok(TraceItem { address, size })
}

/// Reads until `buf` is full or EOF; returns the byte count read.
fn read_full(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Streaming binary writer; the header is emitted on construction.
pub struct BinaryTraceWriter<W: Write> {
    out: W,
}

impl<W: Write> BinaryTraceWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&BINARY_VERSION.to_le_bytes())?;
        out.write_all(&0u32.to_le_bytes())?;
        Ok(Self { out })
    }

    pub fn write(&mut self, item: &TraceItem) -> io::Result<()> {
        let mut rec = [0u8; BINARY_RECORD_LEN];
        rec[0..8].copy_from_slice(&item.address.to_le_bytes());
        rec[8..12].copy_from_slice(&item.size.to_le_bytes());
        self.out.write_all(&rec)
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Writes `items` to `out` in the given format.
pub fn write_trace<'a, W, I>(out: W, format: TraceFormat, items: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a TraceItem>,
{
    let out = BufWriter::new(out);
    match format {
        TraceFormat::Binary => {
            let mut w = BinaryTraceWriter::new(out)?;
            for item in items {
                w.write(item)?;
            }
            w.finish()?;
        }
        TraceFormat::Text => {
            let mut out = out;
            for item in items {
                writeln!(out, "{:x} {}", item.address, item.size)?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn three() -> Vec<TraceItem> {
        vec![
            TraceItem::new(0x100, 4),
            TraceItem::new(0x104, 2),
            TraceItem::new(0x200, 4),
        ]
    }

    fn encode(items: &[TraceItem], format: TraceFormat) -> Vec<u8> {
        let mut buf = Vec::new();
        write_trace(&mut buf, format, items).unwrap();
        buf
    }

    fn read(bytes: &[u8], format: TraceFormat, window: Window) -> Result<Vec<TraceItem>, TraceError> {
        TraceReader::new(Cursor::new(bytes), format, window)?.collect()
    }

    #[test]
    fn binary_identity_window() {
        let bytes = encode(&three(), TraceFormat::Binary);
        assert_eq!(bytes.len(), 16 + 3 * 16);
        assert_eq!(read(&bytes, TraceFormat::Binary, Window::ALL).unwrap(), three());
    }

    #[test]
    fn skip_one_limit_one_yields_second_item() {
        let bytes = encode(&three(), TraceFormat::Binary);
        let got = read(&bytes, TraceFormat::Binary, Window::new(1, Some(1))).unwrap();
        assert_eq!(got, vec![TraceItem::new(0x104, 2)]);
    }

    #[test]
    fn corrupted_magic_is_a_header_error() {
        let mut bytes = encode(&three(), TraceFormat::Binary);
        bytes[0] = b'X';
        assert!(matches!(
            read(&bytes, TraceFormat::Binary, Window::ALL),
            Err(TraceError::Header(_))
        ));
    }

    #[test]
    fn bad_version_and_short_header() {
        let mut bytes = encode(&three(), TraceFormat::Binary);
        bytes[8] = 2;
        assert!(matches!(
            read(&bytes, TraceFormat::Binary, Window::ALL),
            Err(TraceError::Header(_))
        ));
        assert!(matches!(
            read(b"RAINT", TraceFormat::Binary, Window::ALL),
            Err(TraceError::Header(_))
        ));
    }

    #[test]
    fn record_decode() {
        let mut bytes = Vec::from(&BINARY_MAGIC[..]);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&0x100u64.to_le_bytes());
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        let mut r = TraceReader::new(Cursor::new(bytes), TraceFormat::Binary, Window::ALL).unwrap();
        assert_eq!(r.next_item().unwrap(), Some(TraceItem::new(0x100, 4)));
        assert_eq!(r.position(), 1);
        assert_eq!(r.next_item().unwrap(), None);
        assert_eq!(r.position(), 1);
    }

    #[test]
    fn truncated_record_reports_offset() {
        let mut bytes = encode(&three(), TraceFormat::Binary);
        bytes.truncate(16 + 16 + 5);
        let mut r = TraceReader::new(Cursor::new(bytes), TraceFormat::Binary, Window::ALL).unwrap();
        assert!(r.next_item().unwrap().is_some());
        match r.next_item() {
            Err(TraceError::Truncated { offset }) => assert_eq!(offset, 32),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nonzero_flags_rejected() {
        let mut bytes = encode(&three(), TraceFormat::Binary);
        bytes[16 + 12] = 1;
        assert!(matches!(
            read(&bytes, TraceFormat::Binary, Window::ALL),
            Err(TraceError::NonzeroFlags { offset: 16, flags: 1 })
        ));
    }

    #[test]
    fn text_parsing() {
        let text = "# header comment\n\n100 4\n  0x104 2\n200 4\n";
        assert_eq!(read(text.as_bytes(), TraceFormat::Text, Window::ALL).unwrap(), three());
        let err = read(b"100\n".as_slice(), TraceFormat::Text, Window::ALL).unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 1, .. }));
        let err = read(b"# c\nzz 4\n".as_slice(), TraceFormat::Text, Window::ALL).unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 2, .. }));
        let err = read(b"100 0\n".as_slice(), TraceFormat::Text, Window::ALL).unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 1, .. }));
    }

    #[test]
    fn text_and_binary_agree() {
        let items = three();
        let bin = read(&encode(&items, TraceFormat::Binary), TraceFormat::Binary, Window::ALL);
        let txt = read(&encode(&items, TraceFormat::Text), TraceFormat::Text, Window::ALL);
        assert_eq!(bin.unwrap(), txt.unwrap());
    }

    #[test]
    fn missing_file() {
        let err = open_trace("/nonexistent/trace.rtr", TraceFormat::Binary, Window::ALL);
        assert!(matches!(err, Err(TraceError::Open { .. })));
    }
}
