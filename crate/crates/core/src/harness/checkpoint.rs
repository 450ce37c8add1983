//! Plain-text checkpoints: a header naming the experiment, repeat seed, model
//! and parameter layout, followed by one parameter value per line.
//!
//! ```text
//! imbsam-checkpoint 1
//! config {"schema_version":1,...}
//! repeat 0
//! spec {"input_dim":16,...}
//! segments 4
//! 0 weight 0 32x16
//! 0 bias 512 32
//! ...
//! values 874
//! 0.12345
//! ...
//! ```
//!
//! Values are written in shortest round-trip form, so reading a checkpoint
//! reproduces the parameters bit for bit.

use std::io::{BufRead, Write};
use std::sync::Arc;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::model::MlpSpec;
use crate::params::{Layout, ParamVector, Segment, SegmentKind};

const MAGIC: &str = "imbsam-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub repeat: u64,
    pub spec: MlpSpec,
    pub params: ParamVector,
}

fn kind_name(k: SegmentKind) -> &'static str {
    match k {
        SegmentKind::Weight => "weight",
        SegmentKind::Bias => "bias",
        SegmentKind::Free => "free",
    }
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "config {}", serde_json::to_string(&self.config)?)?;
        writeln!(w, "repeat {}", self.repeat)?;
        writeln!(w, "spec {}", serde_json::to_string(&self.spec)?)?;
        let segs = self.params.layout().segments();
        writeln!(w, "segments {}", segs.len())?;
        for s in segs {
            let shape: Vec<String> = s.shape.iter().map(|d| d.to_string()).collect();
            writeln!(w, "{} {} {} {}", s.layer, kind_name(s.kind), s.offset, shape.join("x"))?;
        }
        writeln!(w, "values {}", self.params.len())?;
        for v in self.params.values() {
            writeln!(w, "{v:?}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Checkpoint(format!("unexpected end of file, expected {what}")))
        };
        if next("header")?.trim() != MAGIC {
            return Err(Error::Checkpoint("missing header".into()));
        }
        let field = |line: String, key: &str| -> Result<String> {
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_owned)
                .ok_or_else(|| Error::Checkpoint(format!("expected '{key}' line")))
        };
        let config: ExperimentConfig = serde_json::from_str(&field(next("config")?, "config")?)?;
        let repeat = parse(&field(next("repeat")?, "repeat")?)?;
        let spec: MlpSpec = serde_json::from_str(&field(next("spec")?, "spec")?)?;
        let n_segs: usize = parse(&field(next("segments")?, "segments")?)?;
        let mut segments = Vec::with_capacity(n_segs);
        for _ in 0..n_segs {
            let line = next("segment")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(Error::Checkpoint(format!("bad segment line '{line}'")));
            }
            let kind = match parts[1] {
                "weight" => SegmentKind::Weight,
                "bias" => SegmentKind::Bias,
                "free" => SegmentKind::Free,
                other => return Err(Error::Checkpoint(format!("unknown segment kind '{other}'"))),
            };
            segments.push(Segment {
                layer: parse(parts[0])?,
                kind,
                offset: parse(parts[2])?,
                shape: parts[3].split('x').map(parse).collect::<Result<_>>()?,
            });
        }
        let layout = Layout::new(segments)?;
        if layout != spec.layout() {
            return Err(Error::Checkpoint("layout does not match the model spec".into()));
        }
        let n: usize = parse(&field(next("values")?, "values")?)?;
        let values = (0..n)
            .map(|_| next("value").and_then(|l| parse::<f64>(l.trim())))
            .collect::<Result<Vec<_>>>()?;
        let params = ParamVector::new(values, Arc::new(layout))?;
        Ok(Self {
            config,
            repeat,
            spec,
            params,
        })
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Checkpoint(format!("cannot parse '{s}'")))
}
