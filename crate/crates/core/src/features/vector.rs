use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provenance::{sha256_hex, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Hog,
    Hof,
    Rwpc,
    Sc,
    Ac,
}

impl BlockKind {
    /// Canonical concatenation order.
    pub const ORDER: [BlockKind; 5] = [
        BlockKind::Hog,
        BlockKind::Hof,
        BlockKind::Rwpc,
        BlockKind::Sc,
        BlockKind::Ac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Hog => "hog",
            BlockKind::Hof => "hof",
            BlockKind::Rwpc => "rwpc",
            BlockKind::Sc => "sc",
            BlockKind::Ac => "ac",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl FromStr for BlockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BlockKind::ORDER
            .iter()
            .copied()
            .find(|b| b.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownBlock(s.to_string()))
    }
}

/// A subset of descriptor blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct FeatureMask(u8);

impl FeatureMask {
    pub const EMPTY: FeatureMask = FeatureMask(0);

    pub fn of(blocks: &[BlockKind]) -> Self {
        FeatureMask(blocks.iter().fold(0, |m, b| m | b.bit()))
    }

    pub fn contains(self, b: BlockKind) -> bool {
        self.0 & b.bit() != 0
    }

    pub fn with(self, b: BlockKind) -> Self {
        FeatureMask(self.0 | b.bit())
    }

    pub fn without(self, b: BlockKind) -> Self {
        FeatureMask(self.0 & !b.bit())
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn blocks(self) -> impl Iterator<Item = BlockKind> {
        BlockKind::ORDER.into_iter().filter(move |b| self.contains(*b))
    }

    /// The 15 non-empty subsets of {HOG, HOF, RWPC, SC}.
    pub fn stage1_combinations() -> Vec<FeatureMask> {
        (1u8..16).map(FeatureMask).collect()
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.blocks().map(BlockKind::name).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for FeatureMask {
    type Err = Error;

    /// Accepts `,` or `+` separated block names.
    fn from_str(s: &str) -> Result<Self> {
        let mut m = FeatureMask::EMPTY;
        for tok in s.split([',', '+']).filter(|t| !t.trim().is_empty()) {
            m = m.with(tok.parse()?);
        }
        if m.is_empty() {
            return Err(Error::EmptyMask);
        }
        Ok(m)
    }
}

impl From<FeatureMask> for String {
    fn from(m: FeatureMask) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for FeatureMask {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpan {
    pub block: BlockKind,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Layout(pub Vec<BlockSpan>);

impl Layout {
    pub fn len(&self) -> usize {
        self.0.iter().map(|s| s.len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn span(&self, b: BlockKind) -> Option<BlockSpan> {
        self.0.iter().copied().find(|s| s.block == b)
    }

    pub fn mask(&self) -> FeatureMask {
        FeatureMask::of(&self.0.iter().map(|s| s.block).collect::<Vec<_>>())
    }

    /// Stable short hash of the block layout, e.g. for CSV rows.
    pub fn hash(&self) -> String {
        let desc: Vec<String> = self
            .0
            .iter()
            .map(|s| format!("{}:{}:{}", s.block.name(), s.offset, s.len))
            .collect();
        sha256_hex(desc.join(";").as_bytes())[..16].to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

impl FeatureVector {
    pub fn block(&self, b: BlockKind) -> Option<&[f64]> {
        self.layout.span(b).map(|s| &self.values[s.offset..s.offset + s.len])
    }

    /// `label,block_layout_hash,v1,...,vn` with shortest round-trip decimals.
    pub fn csv_row(&self, label: &str) -> String {
        let mut s = format!("{label},{}", self.layout.hash());
        for v in &self.values {
            s.push(',');
            s.push_str(&format!("{v:?}"));
        }
        s
    }
}

/// Header plus one row per labelled vector; all vectors must share a layout.
pub fn features_csv(rows: &[(&str, &FeatureVector)]) -> Result<String> {
    let Some((_, first)) = rows.first() else {
        return Ok("label,block_layout_hash\n".to_string());
    };
    let mut out = String::from("label,block_layout_hash");
    for i in 1..=first.values.len() {
        out.push_str(&format!(",v{i}"));
    }
    out.push('\n');
    for (label, v) in rows {
        if v.layout != first.layout {
            return Err(Error::DimensionMismatch {
                expected: first.layout.hash(),
                got: v.layout.hash(),
            });
        }
        out.push_str(&v.csv_row(label));
        out.push('\n');
    }
    Ok(out)
}

/// Named descriptor blocks computed for one sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockSet {
    pub hog: Option<Vec<f64>>,
    pub hof: Option<Vec<f64>>,
    pub rwpc: Option<Vec<f64>>,
    pub sc: Option<Vec<f64>>,
    pub ac: Option<Vec<f64>>,
}

impl BlockSet {
    pub fn get(&self, b: BlockKind) -> Option<&Vec<f64>> {
        match b {
            BlockKind::Hog => self.hog.as_ref(),
            BlockKind::Hof => self.hof.as_ref(),
            BlockKind::Rwpc => self.rwpc.as_ref(),
            BlockKind::Sc => self.sc.as_ref(),
            BlockKind::Ac => self.ac.as_ref(),
        }
    }

    pub fn set(&mut self, b: BlockKind, v: Vec<f64>) {
        let slot = match b {
            BlockKind::Hog => &mut self.hog,
            BlockKind::Hof => &mut self.hof,
            BlockKind::Rwpc => &mut self.rwpc,
            BlockKind::Sc => &mut self.sc,
            BlockKind::Ac => &mut self.ac,
        };
        *slot = Some(v);
    }
}

/// Concatenates the masked blocks in canonical order.
pub fn assemble(blocks: &BlockSet, mask: FeatureMask) -> Result<FeatureVector> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut values = Vec::new();
    let mut spans = Vec::new();
    for b in mask.blocks() {
        let v = blocks.get(b).ok_or_else(|| Error::UnknownBlock(b.name().to_string()))?;
        spans.push(BlockSpan {
            block: b,
            offset: values.len(),
            len: v.len(),
        });
        values.extend_from_slice(v);
    }
    Ok(FeatureVector {
        values,
        layout: Layout(spans),
    })
}

/// Per-dimension z-score frozen from training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, 1 for constant dimensions.
    pub scale: Vec<f64>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl Normalizer {
    pub fn fit<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "normalizer needs at least 2 vectors, got {}",
                vectors.len()
            )));
        }
        let d = vectors[0].as_ref().len();
        if vectors.iter().any(|v| v.as_ref().len() != d) {
            return Err(Error::DimensionMismatch {
                expected: format!("{d} dims"),
                got: "ragged vectors".into(),
            });
        }
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; d];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v.as_ref()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for v in vectors {
            for ((s, x), m) in var.iter_mut().zip(v.as_ref()).zip(&mean) {
                *s += (x - m).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Normalizer {
            mean,
            scale,
            provenance: Provenance::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Z-score per dimension, then each block divided by the square root of
    /// its length so every block carries the same expected squared norm.
    pub fn fit_blocks<V: AsRef<[f64]>>(vectors: &[V], layout: &Layout) -> Result<Self> {
        let mut n = Normalizer::fit(vectors)?;
        if layout.len() != n.dim() {
            return Err(Error::len(layout.len(), n.dim()));
        }
        for span in &layout.0 {
            let w = (span.len as f64).sqrt();
            for s in &mut n.scale[span.offset..span.offset + span.len] {
                *s *= w;
            }
        }
        Ok(n)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}
