//! Checkpoints: one `.ft4` file per parameter plus a `manifest.txt`.

use std::fmt::Write as _;
use std::path::Path;

use super::glyphs::{ALPHABET, IMAGE_HEIGHT, IMAGE_WIDTH};
use super::model::{Model, Param};
use crate::tensor;
use crate::{Error, Result};

const FORMAT: &str = "toyocr-1";
pub const MANIFEST: &str = "manifest.txt";

fn manifest_text(model: &Model) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "format={FORMAT}");
    let _ = writeln!(s, "alphabet={ALPHABET}");
    let _ = writeln!(s, "image={IMAGE_HEIGHT}x{IMAGE_WIDTH}");
    for p in &model.params {
        let [a, b, c, d] = p.value.dims();
        let _ = writeln!(s, "tensor={} {a}x{b}x{c}x{d}", p.name);
    }
    s
}

pub fn save(model: &Model, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for p in &model.params {
        tensor::save(dir.join(format!("{}.ft4", p.name)), &p.value)?;
    }
    std::fs::write(dir.join(MANIFEST), manifest_text(model))?;
    Ok(())
}

pub fn load(dir: impl AsRef<Path>) -> Result<Model> {
    let dir = dir.as_ref();
    let manifest = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&manifest)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", manifest.display())))?;
    let mut params = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("malformed manifest line {line:?}")))?;
        let expect = |want: &str| {
            if value == want {
                Ok(())
            } else {
                Err(Error::Checkpoint(format!("{key} is {value:?}, expected {want:?}")))
            }
        };
        match key {
            "format" => expect(FORMAT)?,
            "alphabet" => expect(ALPHABET)?,
            "image" => expect(&format!("{IMAGE_HEIGHT}x{IMAGE_WIDTH}"))?,
            "tensor" => {
                let name = value.split_whitespace().next().unwrap_or_default();
                let value = tensor::load(dir.join(format!("{name}.ft4")))?;
                params.push(Param {
                    name: name.to_string(),
                    value,
                });
            }
            other => return Err(Error::Checkpoint(format!("unknown manifest key {other:?}"))),
        }
    }
    Model::from_params(params)
}
