use super::{Interaction, KineticModel};

/// One-point component of the Vlasov generator applied to the product
/// (Poisson) ansatz `r(eta) = prod_{x in eta} rho(x)`.
///
/// The configuration integrals collapse to exponentials of `-(phi * rho)`, so
/// at a site `y`
/// `(L_V r)({y}) = (a * rho)(y) exp(-(phi * rho)(y)) - rho(y) ∫ a(y - x) exp(-(phi * rho)(x)) dx`.
/// Everything here is summed directly site by site, independently of the
/// FFT path used by [`KineticModel::rhs`]; the two must agree.
pub fn vlasov_first_order(model: &KineticModel, rho: &[f64]) -> Vec<f64> {
    let grid = model.grid();
    let vol = grid.cell_volume();
    let jump = model.jump_kernel().support();
    let n = grid.len();

    let exponent_at = |site: usize| -> f64 {
        match model.interaction() {
            Interaction::None => 0.0,
            Interaction::Local(kappa) => -kappa * rho[site],
            Interaction::Convolution(k) => {
                let base = grid.multi_index(site);
                -k.support()
                    .iter()
                    .map(|(o, w)| w * rho[grid.shifted(&base, o)] * vol)
                    .sum::<f64>()
            }
        }
    };
    let weights: Vec<f64> = (0..n).map(|x| exponent_at(x).exp()).collect();

    (0..n)
        .map(|y| {
            let base = grid.multi_index(y);
            let mut moved_in = 0.0;
            let mut moved_out = 0.0;
            for (o, w) in jump {
                let x = grid.shifted(&base, o);
                moved_in += w * rho[x] * vol;
                moved_out += w * weights[x] * vol;
            }
            moved_in * weights[y] - rho[y] * moved_out
        })
        .collect()
}
