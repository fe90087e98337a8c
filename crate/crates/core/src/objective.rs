//! Training objective of a network on one registered sample, and a
//! finite-difference check of its gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::loss::{l1_with_grad, total_loss_with_grad, LossBreakdown, LossWeights, RegionMasks};
use crate::model::Network;
use crate::params::ParamId;
use crate::scalar::Scalar;
use crate::tensor::{FeatureMap, Tensor};

/// One training example: LR thermal input, optional optical guide, HR target
/// and the masks of the target.
#[derive(Clone, Copy)]
pub struct Sample<'a, T> {
    pub lr: &'a FeatureMap<T>,
    pub optical: Option<&'a FeatureMap<T>>,
    pub hr: &'a FeatureMap<T>,
    pub masks: &'a RegionMasks,
}

pub struct StepOutcome<T> {
    pub loss: LossBreakdown,
    /// L1 of the auxiliary modality-conversion image, when weighted in.
    pub mc_rec: Option<f64>,
    /// The full objective (`loss.total + mc_aux * mc_rec`).
    pub objective: f64,
    /// Gradient per parameter group; `None` for groups the output ignores.
    pub grads: Vec<Option<Tensor<T>>>,
}

fn grad_tensor<T: Scalar>(shape: &[usize], g: Vec<f64>) -> Tensor<T> {
    Tensor::from_vec(shape, g.into_iter().map(T::lit).collect()).expect("gradient matches output shape")
}

/// Forward, loss (soft-histogram training path) and backward.
pub fn loss_and_grad<T: Scalar>(net: &Network<T>, s: Sample<'_, T>, w: &LossWeights) -> Result<StepOutcome<T>> {
    let mut tape = net.tape();
    let out = net.forward(&mut tape, s.lr, s.optical)?;
    let sr = tape.feature_map(out.sr);
    let (loss, g) = total_loss_with_grad(&sr, s.hr, s.masks, w)?;
    if !loss.total.is_finite() {
        return Err(Error::NonFinite(format!("loss is {}", loss.total)));
    }
    let shape = tape.shape(out.sr).to_vec();
    let mut root = tape.scalar_fn(out.sr, T::lit(loss.total), grad_tensor(&shape, g))?;
    let mut objective = loss.total;
    let mut mc_rec = None;
    if let (Some(mc), true) = (out.mc, w.mc_aux > 0.0) {
        let m = tape.feature_map(mc);
        let (l, g) = l1_with_grad(&m, s.hr)?;
        let shape = tape.shape(mc).to_vec();
        let aux = tape.scalar_fn(mc, T::lit(l), grad_tensor(&shape, g))?;
        root = tape.lin_comb(&[(root, T::one()), (aux, T::lit(w.mc_aux))])?;
        objective += w.mc_aux * l;
        mc_rec = Some(l);
    }
    let grads = tape.backward(root)?.into_param_grads();
    Ok(StepOutcome { loss, mc_rec, objective, grads })
}

/// The objective alone, evaluated exactly as in [`loss_and_grad`].
pub fn objective<T: Scalar>(net: &Network<T>, s: Sample<'_, T>, w: &LossWeights) -> Result<f64> {
    let mut tape = net.tape();
    let out = net.forward(&mut tape, s.lr, s.optical)?;
    let sr = tape.feature_map(out.sr);
    let (loss, _) = total_loss_with_grad(&sr, s.hr, s.masks, w)?;
    let mut total = loss.total;
    if let (Some(mc), true) = (out.mc, w.mc_aux > 0.0) {
        total += w.mc_aux * l1_with_grad(&tape.feature_map(mc), s.hr)?.0;
    }
    Ok(total)
}

#[derive(Clone, Debug)]
pub struct GroupCheck {
    pub name: String,
    /// Coordinates compared.
    pub probes: usize,
    /// `||analytic - numeric|| / max(||analytic||, ||numeric||)`, zero when
    /// both vanish.
    pub rel_error: f64,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
}

/// Compares analytic gradients against central differences with step `h`
/// on up to `probes` seeded coordinates of every parameter group.
pub fn check_gradients(
    net: &mut Network<f64>,
    s: Sample<'_, f64>,
    w: &LossWeights,
    h: f64,
    probes: usize,
    seed: u64,
) -> Result<Vec<GroupCheck>> {
    let analytic = loss_and_grad(net, s, w)?.grads;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<ParamId> = net.params().ids().collect();
    let mut report = Vec::with_capacity(ids.len());
    for id in ids {
        let n = net.params().get(id).len();
        let coords: Vec<usize> = if n <= probes { (0..n).collect() } else { (0..probes).map(|_| rng.gen_range(0..n)).collect() };
        let (mut diff, mut an, mut nn) = (0.0, 0.0, 0.0);
        for &i in &coords {
            let orig = net.params().get(id).data[i];
            net.params_mut().get_mut(id).data[i] = orig + h;
            let plus = objective(net, s, w)?;
            net.params_mut().get_mut(id).data[i] = orig - h;
            let minus = objective(net, s, w)?;
            net.params_mut().get_mut(id).data[i] = orig;
            let num = (plus - minus) / (2.0 * h);
            let a = analytic[id.index()].as_ref().map_or(0.0, |g| g.data[i]);
            diff += (a - num).powi(2);
            an += a * a;
            nn += num * num;
        }
        let (an, nn) = (an.sqrt(), nn.sqrt());
        let scale = an.max(nn);
        let rel_error = if scale == 0.0 { 0.0 } else { diff.sqrt() / scale };
        report.push(GroupCheck {
            name: net.params().name(id).to_string(),
            probes: coords.len(),
            rel_error,
            analytic_norm: an,
            numeric_norm: nn,
        });
    }
    Ok(report)
}
