use core::fmt;
use core::str::FromStr;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::activation::Activation;
use super::dropout::check_rate;
use crate::error::{Error, Result};

/// One row of an encoder/decoder table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerKind {
    Dense {
        units: usize,
        activation: Activation,
    },
    Conv2D {
        filters: usize,
        kernel_h: usize,
        kernel_w: usize,
        activation: Activation,
    },
    MaxPool2D {
        pool_h: usize,
        pool_w: usize,
    },
    Flatten,
    Dropout {
        rate: f64,
    },
    /// Marks where the channel sits in an end-to-end stack. Identity inside a
    /// [`Network`](super::Network); the system applies the actual channel.
    ChannelStub,
}

impl LayerKind {
    pub fn dense(units: usize, activation: Activation) -> Self {
        LayerKind::Dense { units, activation }
    }

    pub fn conv(filters: usize, kernel: (usize, usize), activation: Activation) -> Self {
        LayerKind::Conv2D {
            filters,
            kernel_h: kernel.0,
            kernel_w: kernel.1,
            activation,
        }
    }

    pub fn maxpool(pool: (usize, usize)) -> Self {
        LayerKind::MaxPool2D {
            pool_h: pool.0,
            pool_w: pool.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerKind::Dense { units: 0, .. } => {
                Err(Error::config("dense size must be at least 1"))
            }
            LayerKind::Conv2D {
                filters,
                kernel_h,
                kernel_w,
                ..
            } if filters == 0 || kernel_h == 0 || kernel_w == 0 => Err(Error::config(
                "conv filters and kernel sizes must be at least 1",
            )),
            LayerKind::MaxPool2D { pool_h, pool_w } if pool_h == 0 || pool_w == 0 => {
                Err(Error::config("pool sizes must be at least 1"))
            }
            LayerKind::Dropout { rate } => check_rate(rate),
            _ => Ok(()),
        }
    }

    pub fn activation(&self) -> Option<Activation> {
        match *self {
            LayerKind::Dense { activation, .. } | LayerKind::Conv2D { activation, .. } => {
                Some(activation)
            }
            _ => None,
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        match *self {
            LayerKind::Dense { units, .. } => {
                if input.len() != 1 {
                    return Err(Error::Dimension {
                        op: "dense expects flat input",
                        expected: vec![input.iter().product()],
                        got: input.to_vec(),
                    });
                }
                Ok(vec![units])
            }
            LayerKind::Conv2D {
                filters,
                kernel_h,
                kernel_w,
                ..
            } => {
                let [h, w, _c] = spatial(input, "conv2d")?;
                if kernel_h > h || kernel_w > w {
                    return Err(Error::dim(
                        "conv2d kernel exceeds input",
                        &[h, w],
                        &[kernel_h, kernel_w],
                    ));
                }
                Ok(vec![h - kernel_h + 1, w - kernel_w + 1, filters])
            }
            LayerKind::MaxPool2D { pool_h, pool_w } => {
                let [h, w, c] = spatial(input, "maxpool2d")?;
                if pool_h > h || pool_w > w {
                    return Err(Error::dim(
                        "maxpool2d pool exceeds input",
                        &[h, w],
                        &[pool_h, pool_w],
                    ));
                }
                Ok(vec![h / pool_h, w / pool_w, c])
            }
            LayerKind::Flatten => Ok(vec![input.iter().product()]),
            LayerKind::Dropout { .. } | LayerKind::ChannelStub => Ok(input.to_vec()),
        }
    }

    /// Shapes of (weights, bias) for a per-sample input shape; empty when the
    /// layer has no parameters.
    pub fn param_shapes(&self, input: &[usize]) -> Result<Vec<Vec<usize>>> {
        Ok(match *self {
            LayerKind::Dense { units, .. } => {
                self.output_shape(input)?;
                vec![vec![input[0], units], vec![units]]
            }
            LayerKind::Conv2D {
                filters,
                kernel_h,
                kernel_w,
                ..
            } => {
                self.output_shape(input)?;
                vec![vec![kernel_h, kernel_w, input[2], filters], vec![filters]]
            }
            _ => Vec::new(),
        })
    }
}

fn spatial(input: &[usize], op: &'static str) -> Result<[usize; 3]> {
    match *input {
        [h, w, c] => Ok([h, w, c]),
        _ => Err(Error::Dimension {
            op,
            expected: vec![0, 0, 0],
            got: input.to_vec(),
        }),
    }
}

/// Compact text form used in checkpoints, e.g. `dense(256,relu)` or
/// `conv2d(32,3,3,relu)`.
impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerKind::Dense { units, activation } => write!(f, "dense({units},{activation})"),
            LayerKind::Conv2D {
                filters,
                kernel_h,
                kernel_w,
                activation,
            } => write!(f, "conv2d({filters},{kernel_h},{kernel_w},{activation})"),
            LayerKind::MaxPool2D { pool_h, pool_w } => write!(f, "maxpool2d({pool_h},{pool_w})"),
            LayerKind::Flatten => f.write_str("flatten"),
            LayerKind::Dropout { rate } => write!(f, "dropout({rate})"),
            LayerKind::ChannelStub => f.write_str("channel"),
        }
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) if s.ends_with(')') => (&s[..open], &s[open + 1..s.len() - 1]),
            Some(_) => return Err(Error::input(format!("malformed layer `{s}`"))),
            None => (s, ""),
        };
        let args: Vec<&str> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',').map(str::trim).collect()
        };
        let int = |i: usize| -> Result<usize> {
            args.get(i)
                .and_then(|a| a.parse().ok())
                .ok_or_else(|| Error::input(format!("bad integer argument {i} in `{s}`")))
        };
        let act = |i: usize| -> Result<Activation> {
            args.get(i)
                .ok_or_else(|| Error::input(format!("missing activation in `{s}`")))?
                .parse()
        };
        let arity = |n: usize| -> Result<()> {
            if args.len() != n {
                return Err(Error::input(format!("`{name}` takes {n} arguments")));
            }
            Ok(())
        };
        let kind = match name {
            "dense" => {
                arity(2)?;
                LayerKind::dense(int(0)?, act(1)?)
            }
            "conv2d" => {
                arity(4)?;
                LayerKind::conv(int(0)?, (int(1)?, int(2)?), act(3)?)
            }
            "maxpool2d" => {
                arity(2)?;
                LayerKind::maxpool((int(0)?, int(1)?))
            }
            "flatten" => {
                arity(0)?;
                LayerKind::Flatten
            }
            "dropout" => {
                arity(1)?;
                let rate = args[0]
                    .parse()
                    .map_err(|_| Error::input(format!("bad dropout rate in `{s}`")))?;
                LayerKind::Dropout { rate }
            }
            "channel" => {
                arity(0)?;
                LayerKind::ChannelStub
            }
            other => return Err(Error::input(format!("unknown layer `{other}`"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}
