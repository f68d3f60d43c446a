//! Finite-difference verification of the tape's gradients.
//!
//! Always runs in f64: central differences at eps = 1e-5 lose too many
//! digits in f32 to verify a 1e-4 bound.

use crate::attention::{
    spatial_encode, temporal_encode, ChannelParams, MultiHeadParams, PosMode, PositionalEncoder,
};
use crate::error::Result;
use crate::rng::Rng;
use crate::tape::{NodeId, ParamSet, Tape};
use crate::tensor::NdArray;

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;

/// Result of one named gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub name: String,
    pub max_rel_error: f64,
    pub coords: usize,
    /// `"param_name[flat_index]"` of the worst coordinate.
    pub worst: String,
}

impl GradCheckReport {
    pub fn passes(&self) -> bool {
        self.max_rel_error < DEFAULT_TOL
    }
}

/// A loss builder: records the computation on a fresh tape and returns the
/// scalar loss node. Called repeatedly with perturbed parameter values.
pub trait LossFn {
    fn build(&self, tape: &mut Tape<f64>, params: &ParamSet<f64>) -> Result<NodeId>;
}

impl<F> LossFn for F
where
    F: Fn(&mut Tape<f64>, &ParamSet<f64>) -> Result<NodeId>,
{
    fn build(&self, tape: &mut Tape<f64>, params: &ParamSet<f64>) -> Result<NodeId> {
        self(tape, params)
    }
}

fn loss_value(params: &ParamSet<f64>, f: &dyn LossFn) -> Result<f64> {
    let mut tape = Tape::new();
    let loss = f.build(&mut tape, params)?;
    Ok(tape.value(loss).data()[0])
}

/// One reverse pass: the tape's gradient for every parameter (zeros for
/// non-trainable entries).
pub fn analytic_gradients(params: &mut ParamSet<f64>, f: &dyn LossFn) -> Result<Vec<NdArray<f64>>> {
    params.zero_grads();
    let mut tape = Tape::new();
    let loss = f.build(&mut tape, params)?;
    tape.backward(loss, params)?;
    Ok(params.ids().map(|id| params.grad(id).clone()).collect())
}

/// Central differences `(f(x+eps) - f(x-eps)) / 2 eps` per coordinate of
/// every trainable parameter.
pub fn numeric_gradients(
    params: &mut ParamSet<f64>,
    f: &dyn LossFn,
    eps: f64,
) -> Result<Vec<NdArray<f64>>> {
    let ids: Vec<_> = params.ids().collect();
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let n = params.value(id).len();
        let mut grad = NdArray::zeros(params.value(id).shape());
        if params.get(id).trainable {
            for i in 0..n {
                let orig = params.value(id).data()[i];
                params.get_mut(id).value.data_mut()[i] = orig + eps;
                let plus = loss_value(params, f)?;
                params.get_mut(id).value.data_mut()[i] = orig - eps;
                let minus = loss_value(params, f)?;
                params.get_mut(id).value.data_mut()[i] = orig;
                grad.data_mut()[i] = (plus - minus) / (2.0 * eps);
            }
        }
        out.push(grad);
    }
    Ok(out)
}

/// Max over coordinates of `|analytic - numeric| / max(|numeric|, 1e-6)`.
/// Split out from [`grad_check`] so a corrupted gradient set can be fed in
/// directly (the mutation test for the checker itself).
pub fn max_rel_error(
    params: &ParamSet<f64>,
    analytic: &[NdArray<f64>],
    numeric: &[NdArray<f64>],
) -> (f64, usize, String) {
    let mut worst_err = 0.0;
    let mut worst = String::from("-");
    let mut coords = 0;
    for (idx, id) in params.ids().enumerate() {
        if !params.get(id).trainable {
            continue;
        }
        for i in 0..analytic[idx].len() {
            let a = analytic[idx].data()[i];
            let n = numeric[idx].data()[i];
            let rel = (a - n).abs() / n.abs().max(1e-6);
            coords += 1;
            if rel > worst_err {
                worst_err = rel;
                worst = format!("{}[{}]", params.get(id).name, i);
            }
        }
    }
    (worst_err, coords, worst)
}

/// Full check of one loss function against central differences.
pub fn grad_check(
    name: &str,
    params: &mut ParamSet<f64>,
    f: &dyn LossFn,
    eps: f64,
) -> Result<GradCheckReport> {
    let analytic = analytic_gradients(params, f)?;
    let numeric = numeric_gradients(params, f, eps)?;
    let (max_rel_error, coords, worst) = max_rel_error(params, &analytic, &numeric);
    Ok(GradCheckReport {
        name: name.to_string(),
        max_rel_error,
        coords,
        worst,
    })
}

// ---- named battery ---------------------------------------------------

/// Fills a tensor with values bounded away from 0 (no ReLU kinks near the
/// finite-difference step): magnitudes in [0.2, 1.2], random sign.
fn kink_free(shape: &[usize], rng: &mut Rng) -> NdArray<f64> {
    NdArray::from_fn(shape, |_| {
        let mag = rng.uniform(0.2, 1.2);
        if rng.bounded(2) == 0 {
            mag
        } else {
            -mag
        }
    })
}

/// Weighted mean of a node against fixed random weights; turns any output
/// into a scalar loss with non-degenerate gradients everywhere.
fn weighted_mean(tape: &mut Tape<f64>, node: NodeId, rng: &mut Rng) -> Result<NodeId> {
    let shape = tape.shape(node).to_vec();
    let w = tape.input(NdArray::from_fn(&shape, |_| rng.uniform(0.5, 1.5)));
    let prod = tape.mul(node, w)?;
    let axes: Vec<usize> = (0..shape.len()).collect();
    tape.reduce_mean(prod, &axes)
}

/// A seeded scalar-loss builder used by the battery cases.
type CaseLoss = Box<dyn Fn(&mut Tape<f64>, &ParamSet<f64>, u64) -> Result<NodeId>>;

/// Runs the named check battery: every differentiable primitive plus the
/// three composed attention blocks, at dims n_t=3, h_f=w_f=2, n_c=8, h=2.
pub fn battery(seed: u64) -> Result<Vec<GradCheckReport>> {
    let mut out = Vec::new();
    let case = |name: &str,
                setup: &dyn Fn(&mut ParamSet<f64>, &mut Rng),
                loss: CaseLoss|
     -> Result<GradCheckReport> {
        let mut params = ParamSet::new();
        let mut rng = Rng::new(seed ^ crate::rng::fnv1a64(name.as_bytes()));
        setup(&mut params, &mut rng);
        let wseed = rng.next_u64();
        let f = move |tape: &mut Tape<f64>, params: &ParamSet<f64>| loss(tape, params, wseed);
        grad_check(name, &mut params, &f, DEFAULT_EPS)
    };

    // -- primitives --------------------------------------------------
    out.push(case(
        "matmul",
        &|p, rng| {
            p.add("a", kink_free(&[3, 4], rng), true);
            p.add("b", kink_free(&[4, 5], rng), true);
        },
        Box::new(|t, p, ws| {
            let a = t.param(p, p.find("a").unwrap());
            let b = t.param(p, p.find("b").unwrap());
            let y = t.matmul(a, b)?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "transpose",
        &|p, rng| {
            p.add("a", kink_free(&[3, 5], rng), true);
        },
        Box::new(|t, p, ws| {
            let a = t.param(p, p.find("a").unwrap());
            let y = t.transpose(a)?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "softmax",
        &|p, rng| {
            p.add("a", kink_free(&[3, 6], rng), true);
        },
        Box::new(|t, p, ws| {
            let a = t.param(p, p.find("a").unwrap());
            let y = t.softmax(a, 1)?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "relu",
        &|p, rng| {
            p.add("a", kink_free(&[4, 4], rng), true);
        },
        Box::new(|t, p, ws| {
            let a = t.param(p, p.find("a").unwrap());
            let y = t.relu(a)?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "sigmoid",
        &|p, rng| {
            p.add("a", kink_free(&[4, 4], rng), true);
        },
        Box::new(|t, p, ws| {
            let a = t.param(p, p.find("a").unwrap());
            let y = t.sigmoid(a)?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "add",
        &|p, rng| {
            p.add("a", kink_free(&[3, 4], rng), true);
            p.add("b", kink_free(&[3, 4], rng), true);
        },
        Box::new(|t, p, ws| {
            let a = t.param(p, p.find("a").unwrap());
            let b = t.param(p, p.find("b").unwrap());
            let y = t.add(a, b)?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "add_row",
        &|p, rng| {
            p.add("a", kink_free(&[3, 4], rng), true);
            p.add("bias", kink_free(&[4], rng), true);
        },
        Box::new(|t, p, ws| {
            let a = t.param(p, p.find("a").unwrap());
            let b = t.param(p, p.find("bias").unwrap());
            let y = t.add_row(a, b)?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "mul",
        &|p, rng| {
            p.add("a", kink_free(&[3, 4], rng), true);
            p.add("b", kink_free(&[3, 4], rng), true);
        },
        Box::new(|t, p, ws| {
            let a = t.param(p, p.find("a").unwrap());
            let b = t.param(p, p.find("b").unwrap());
            let y = t.mul(a, b)?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "mul_channel",
        &|p, rng| {
            p.add("x", kink_free(&[3, 2, 2, 8], rng), true);
            p.add("gate", kink_free(&[8], rng), true);
        },
        Box::new(|t, p, ws| {
            let x = t.param(p, p.find("x").unwrap());
            let g = t.param(p, p.find("gate").unwrap());
            let y = t.mul_channel(x, g)?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "scale",
        &|p, rng| {
            p.add("a", kink_free(&[3, 4], rng), true);
        },
        Box::new(|t, p, ws| {
            let a = t.param(p, p.find("a").unwrap());
            let y = t.scale(a, 0.37)?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "reduce_mean",
        &|p, rng| {
            p.add("x", kink_free(&[3, 2, 2, 8], rng), true);
        },
        Box::new(|t, p, ws| {
            let x = t.param(p, p.find("x").unwrap());
            let y = t.reduce_mean(x, &[1, 2])?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "reshape_slice_stack",
        &|p, rng| {
            p.add("x", kink_free(&[3, 2, 4], rng), true);
        },
        Box::new(|t, p, ws| {
            let x = t.param(p, p.find("x").unwrap());
            let s0 = t.slice_index(x, 0)?;
            let s2 = t.slice_index(x, 2)?;
            let st = t.stack(&[s2, s0])?;
            let y = t.reshape(st, &[4, 4])?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "concat_rows",
        &|p, rng| {
            p.add("a", kink_free(&[2, 4], rng), true);
            p.add("b", kink_free(&[3, 4], rng), true);
        },
        Box::new(|t, p, ws| {
            let a = t.param(p, p.find("a").unwrap());
            let b = t.param(p, p.find("b").unwrap());
            let y = t.concat_rows(&[a, b])?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "concat_cols",
        &|p, rng| {
            p.add("a", kink_free(&[3, 2], rng), true);
            p.add("b", kink_free(&[3, 4], rng), true);
        },
        Box::new(|t, p, ws| {
            let a = t.param(p, p.find("a").unwrap());
            let b = t.param(p, p.find("b").unwrap());
            let y = t.concat_cols(&[a, b])?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "cosine_rows",
        &|p, rng| {
            p.add("a", kink_free(&[3, 8], rng), true);
            p.add("b", kink_free(&[3, 8], rng), true);
        },
        Box::new(|t, p, ws| {
            let a = t.param(p, p.find("a").unwrap());
            let b = t.param(p, p.find("b").unwrap());
            let y = t.cosine_rows(a, b)?;
            let y2 = t.reshape(y, &[3, 1])?;
            weighted_mean(t, y2, &mut Rng::new(ws))
        }),
    )?);

    out.push(case(
        "cross_entropy",
        &|p, rng| {
            p.add("logits", kink_free(&[4, 5], rng), true);
        },
        Box::new(|t, p, _| {
            let l = t.param(p, p.find("logits").unwrap());
            t.cross_entropy(l, &[0, 2, 4, 1])
        }),
    )?);

    out.push(case(
        "linear",
        &|p, rng| {
            p.add("x", kink_free(&[3, 8], rng), true);
            p.add("w", kink_free(&[8, 5], rng), true);
            p.add("b", kink_free(&[5], rng), true);
        },
        Box::new(|t, p, ws| {
            let x = t.param(p, p.find("x").unwrap());
            let w = t.param(p, p.find("w").unwrap());
            let b = t.param(p, p.find("b").unwrap());
            let y = t.linear(x, w, b)?;
            weighted_mean(t, y, &mut Rng::new(ws))
        }),
    )?);

    // -- composed blocks at n_t=3, h_f=w_f=2, n_c=8, heads=2 ----------
    out.push(block_case(seed, "block_spatial", |t, p, mha, _, _, x| {
        spatial_encode(t, p, mha, x)
    })?);
    out.push(block_case(seed, "block_channel", |t, p, _, ch, _, x| {
        Ok(ch.gate(t, p, x)?.1)
    })?);
    out.push(block_case(
        seed,
        "block_temporal",
        |t, p, mha, _, pe, x| {
            let z = t.reduce_mean(x, &[1, 2])?;
            let z = pe.apply(t, p, z)?;
            temporal_encode(t, p, mha, z)
        },
    )?);

    Ok(out)
}

fn block_case(
    seed: u64,
    name: &str,
    body: impl Fn(
            &mut Tape<f64>,
            &ParamSet<f64>,
            &MultiHeadParams,
            &ChannelParams,
            &PositionalEncoder<f64>,
            NodeId,
        ) -> Result<NodeId>
        + 'static,
) -> Result<GradCheckReport> {
    let mut params = ParamSet::new();
    let mut rng = Rng::new(seed ^ crate::rng::fnv1a64(name.as_bytes()));
    let mha = MultiHeadParams::new(&mut params, "b", 8, 2, &mut rng)?;
    let ch = ChannelParams::new(&mut params, "c", 8, 4, &mut rng)?;
    let pe = PositionalEncoder::new(&mut params, "p", PosMode::Learnable, 3, 8, &mut rng);
    params.add("x", kink_free(&[3, 2, 2, 8], &mut rng), true);
    let wseed = rng.next_u64();
    let f = move |t: &mut Tape<f64>, p: &ParamSet<f64>| {
        let x = t.param(p, p.find("x").unwrap());
        let y = body(t, p, &mha, &ch, &pe, x)?;
        weighted_mean(t, y, &mut Rng::new(wseed))
    };
    grad_check(name, &mut params, &f, DEFAULT_EPS)
}
