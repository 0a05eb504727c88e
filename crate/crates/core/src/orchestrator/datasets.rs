//! Resolving dataset names given on the command line.

use std::path::{Path, PathBuf};

use crate::data::{load_dataset, load_idx, make_synthetic, LabeledDataset, Split};
use crate::error::{Error, Result};

const TRAIN_SEED: u64 = 11;
const TEST_SEED: u64 = 12;

/// `(classes, train per class, test per class, side)` of a synthetic spec.
fn synthetic_dims(name: &str) -> Option<Result<(usize, usize, usize, usize)>> {
    if name == "synthetic" {
        return Some(Ok((10, 600, 200, 28)));
    }
    let rest = name.strip_prefix("synthetic:")?;
    let parts: Result<Vec<usize>> = rest
        .split(':')
        .map(|p| {
            p.parse()
                .map_err(|_| Error::Config(format!("synthetic dataset `{name}` has a non-numeric field `{p}`")))
        })
        .collect();
    Some(parts.and_then(|p| match p.as_slice() {
        [c, tr, te, side] => Ok((*c, *tr, *te, *side)),
        _ => Err(Error::Config(format!(
            "synthetic dataset `{name}` must be synthetic:CLASSES:TRAIN:TEST:SIDE"
        ))),
    }))
}

fn find_idx(dir: &Path, stem: &str) -> Option<PathBuf> {
    [stem.to_string(), format!("{stem}.gz")]
        .into_iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
}

/// Locates the four standard MNIST IDX files (optionally gzipped) in `dir`.
pub fn mnist_files(dir: &Path) -> Option<[PathBuf; 4]> {
    Some([
        find_idx(dir, "train-images-idx3-ubyte")?,
        find_idx(dir, "train-labels-idx1-ubyte")?,
        find_idx(dir, "t10k-images-idx3-ubyte")?,
        find_idx(dir, "t10k-labels-idx1-ubyte")?,
    ])
}

/// Train and test splits for a dataset name:
///
/// * `synthetic` (10 classes, 600/200 per class, 1x28x28) or
///   `synthetic:CLASSES:TRAIN:TEST:SIDE`;
/// * `mnist`, read from `data_dir` (default `data/mnist`);
/// * a directory holding `train.airdata` and `test.airdata`.
pub fn load_named(name: &str, data_dir: Option<&Path>) -> Result<(LabeledDataset, LabeledDataset)> {
    if let Some(dims) = synthetic_dims(name) {
        let (classes, tr, te, side) = dims?;
        let shape = [1, side, side];
        return Ok((
            make_synthetic(classes, tr, shape, TRAIN_SEED, Split::Train)?,
            make_synthetic(classes, te, shape, TEST_SEED, Split::Test)?,
        ));
    }
    if name.eq_ignore_ascii_case("mnist") {
        let dir = data_dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("data/mnist"));
        let [tri, trl, tei, tel] = mnist_files(&dir).ok_or_else(|| {
            Error::Config(format!("MNIST IDX files not found in {}", dir.display()))
        })?;
        return Ok((load_idx(tri, trl)?, load_idx(tei, tel)?));
    }
    let dir = Path::new(name);
    let (train, test) = (dir.join("train.airdata"), dir.join("test.airdata"));
    if train.is_file() && test.is_file() {
        return Ok((load_dataset(train)?, load_dataset(test)?.with_split(Split::Test)));
    }
    Err(Error::Config(format!(
        "dataset `{name}` is not available (use synthetic, synthetic:C:TRAIN:TEST:SIDE, mnist, or a directory with train.airdata/test.airdata)"
    )))
}

/// Short family name used to pick default hyperparameters.
pub fn family(name: &str) -> String {
    if name.starts_with("synthetic") {
        "synthetic".into()
    } else {
        name.to_ascii_lowercase()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_specs() {
        let (tr, te) = load_named("synthetic:3:4:2:8", None).unwrap();
        assert_eq!((tr.len(), te.len(), tr.image_shape()), (12, 6, [1, 8, 8]));
        assert!(load_named("synthetic:3:4", None).is_err());
        assert!(load_named("cifar10", None).is_err());
    }
}
