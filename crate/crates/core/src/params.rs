//! Flat parameter and gradient vectors with a segment layout describing where
//! each layer's weights and biases live.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::tensor::{self, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Weight,
    Bias,
    /// Unstructured coordinates (fixtures without layers).
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub layer: usize,
    pub kind: SegmentKind,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered segment descriptors tiling `[0, len)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    segments: Vec<Segment>,
    len: usize,
}

impl Layout {
    /// Builds a layout, rejecting segments that leave gaps or overlap.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let mut cursor = 0;
        for s in &segments {
            if s.offset != cursor {
                return Err(Error::invalid(format!(
                    "segment for layer {} starts at {} but previous segment ends at {cursor}",
                    s.layer, s.offset
                )));
            }
            cursor += s.len();
        }
        Ok(Self { segments, len: cursor })
    }

    /// Single unstructured segment of `n` coordinates.
    pub fn flat(n: usize) -> Self {
        let segments = if n == 0 {
            Vec::new()
        } else {
            vec![Segment {
                layer: 0,
                kind: SegmentKind::Free,
                offset: 0,
                shape: vec![n],
            }]
        };
        Self { segments, len: n }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

macro_rules! flat_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            values: Vec<f64>,
            layout: Arc<Layout>,
        }

        impl $name {
            pub fn new(values: Vec<f64>, layout: Arc<Layout>) -> Result<Self> {
                check_len(stringify!($name), layout.len(), values.len())?;
                Ok(Self { values, layout })
            }

            pub fn zeros(layout: Arc<Layout>) -> Self {
                Self { values: vec![0.0; layout.len()], layout }
            }

            /// Vector with a single free segment.
            pub fn from_vec(values: Vec<f64>) -> Self {
                let layout = Arc::new(Layout::flat(values.len()));
                Self { values, layout }
            }

            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut [f64] {
                &mut self.values
            }

            pub fn into_values(self) -> Vec<f64> {
                self.values
            }

            pub fn layout(&self) -> &Arc<Layout> {
                &self.layout
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            pub fn segment(&self, seg: &Segment) -> &[f64] {
                &self.values[seg.range()]
            }

            pub fn norm(&self) -> f64 {
                tensor::norm2(&self.values)
            }

            pub fn is_finite(&self) -> bool {
                self.values.iter().all(|v| v.is_finite())
            }
        }
    };
}

flat_vector!(
    /// Flattened model parameters θ.
    ParamVector
);
flat_vector!(
    /// A gradient, Hessian-vector product or direction in parameter space.
    GradVector
);

impl ParamVector {
    /// `θ + scale · direction`, evaluated into a fresh vector.
    pub fn offset(&self, direction: &GradVector, scale: f64) -> Result<ParamVector> {
        check_len("direction", self.len(), direction.len())?;
        let values = self
            .values
            .iter()
            .zip(direction.values())
            .map(|(t, d)| t + scale * d)
            .collect();
        Ok(ParamVector {
            values,
            layout: self.layout.clone(),
        })
    }

    /// θ + ε for a perturbation ε.
    pub fn perturbed(&self, eps: &GradVector) -> Result<ParamVector> {
        check_len("perturbation", self.len(), eps.len())?;
        let values = self.values.iter().zip(eps.values()).map(|(t, e)| t + e).collect();
        Ok(ParamVector {
            values,
            layout: self.layout.clone(),
        })
    }
}

impl GradVector {
    pub fn dot(&self, other: &GradVector) -> f64 {
        tensor::dot(&self.values, &other.values)
    }

    pub fn scaled(&self, s: f64) -> GradVector {
        GradVector {
            values: self.values.iter().map(|v| v * s).collect(),
            layout: self.layout.clone(),
        }
    }

    /// Element-wise `self + other`.
    pub fn add(&self, other: &GradVector) -> Result<GradVector> {
        check_len("gradient", self.len(), other.len())?;
        Ok(GradVector {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            layout: self.layout.clone(),
        })
    }

    pub fn unit(&self) -> Result<GradVector> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(self.scaled(1.0 / n))
    }
}

/// A fully connected layer: `weight` is `[fan_out, fan_in]`, `bias` is `[fan_out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape().len() != 1 {
            return Err(Error::invalid("linear layer needs a 2-D weight and 1-D bias"));
        }
        check_len("bias", weight.shape()[0], bias.len())?;
        Ok(Self { weight, bias })
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[fan_out, fan_in]),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape()[0]
    }
}

/// Layout for a stack of dense layers with the given widths
/// (`dims[0]` inputs, `dims[last]` outputs).
pub fn dense_layout(dims: &[usize]) -> Layout {
    let mut segments = Vec::new();
    let mut offset = 0;
    for (layer, w) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        segments.push(Segment {
            layer,
            kind: SegmentKind::Weight,
            offset,
            shape: vec![fan_out, fan_in],
        });
        offset += fan_in * fan_out;
        segments.push(Segment {
            layer,
            kind: SegmentKind::Bias,
            offset,
            shape: vec![fan_out],
        });
        offset += fan_out;
    }
    Layout { segments, len: offset }
}

/// Packs layers into θ: for each layer, its weights (row-major) then its biases.
pub fn flatten_params(layers: &[Linear]) -> ParamVector {
    let mut segments = Vec::with_capacity(layers.len() * 2);
    let mut values = Vec::new();
    for (layer, l) in layers.iter().enumerate() {
        segments.push(Segment {
            layer,
            kind: SegmentKind::Weight,
            offset: values.len(),
            shape: l.weight.shape().to_vec(),
        });
        values.extend_from_slice(l.weight.data());
        segments.push(Segment {
            layer,
            kind: SegmentKind::Bias,
            offset: values.len(),
            shape: l.bias.shape().to_vec(),
        });
        values.extend_from_slice(l.bias.data());
    }
    let len = values.len();
    ParamVector {
        values,
        layout: Arc::new(Layout { segments, len }),
    }
}

/// Inverse of [`flatten_params`].
pub fn unflatten_params(params: &ParamVector) -> Result<Vec<Linear>> {
    let segs = params.layout().segments();
    if !segs.len().is_multiple_of(2) {
        return Err(Error::invalid("layout does not describe weight/bias pairs"));
    }
    segs.chunks(2)
        .map(|pair| {
            let (w, b) = (&pair[0], &pair[1]);
            if w.kind != SegmentKind::Weight || b.kind != SegmentKind::Bias {
                return Err(Error::invalid("layout does not describe weight/bias pairs"));
            }
            Linear::new(
                Tensor::new(w.shape.clone(), params.segment(w).to_vec())?,
                Tensor::new(b.shape.clone(), params.segment(b).to_vec())?,
            )
        })
        .collect()
}
