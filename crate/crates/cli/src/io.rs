use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

/// Reads a text file, decompressing when the name ends in `.gz`.
pub fn read_text(path: &Path) -> std::io::Result<String> {
    let mut out = String::new();
    let f = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(f).read_to_string(&mut out)?;
    } else {
        let mut f = f;
        f.read_to_string(&mut out)?;
    }
    Ok(out)
}

/// Writes `text` to `dir/name`, or to `dir/name.gz` compressed. Returns the
/// file name actually written.
pub fn write_text(dir: &Path, name: &str, text: &str, gzip: bool) -> std::io::Result<String> {
    if gzip {
        let name = format!("{name}.gz");
        let mut enc = GzEncoder::new(File::create(dir.join(&name))?, Compression::default());
        enc.write_all(text.as_bytes())?;
        enc.finish()?;
        Ok(name)
    } else {
        std::fs::write(dir.join(name), text)?;
        Ok(name.to_string())
    }
}

/// `dir/name` or `dir/name.gz`, whichever exists.
pub fn find(dir: &Path, name: &str) -> Option<PathBuf> {
    [dir.join(name), dir.join(format!("{name}.gz"))].into_iter().find(|p| p.is_file())
}
