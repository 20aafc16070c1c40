//! Self-contained oracle/invariant battery behind the `validate` CLI
//! subcommand. Each check is a fast, deterministic version of the module
//! correctness properties.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::banded::CyclicBandedMatrix;
use crate::channel::{
    fd_channel_matrix, oversampled_propagate, sample_channel, td_channel_matrix, ChannelProfile,
};
use crate::config::SystemConfig;
use crate::equalizer::{
    complexity_model, full_block_lmmse, local_mmse_sweep, stage1_banded_lmmse, SweepMode,
};
use crate::mat::rel_l2_error;
use crate::pulse::{composition_filter, modulate, PulseConfig};
use crate::transforms::{daft, daft_matrix, dft_unitary, idaft, idft_unitary, DaftParams};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

fn test_system(n: usize) -> SystemConfig {
    SystemConfig {
        n,
        bandwidth_hz: 0.96e6,
        frame_duration_s: None,
        c1: None,
        c2: 0.0,
        l_cpp: None,
        rolloff: 0.1,
        trunc_threshold: 1e-3,
        gamma: 4,
        tap_convention: Default::default(),
    }
}

/// Run the full validation battery (seconds, deterministic).
pub fn run_validation() -> Vec<Check> {
    let mut rng = ChaCha12Rng::seed_from_u64(0xAFD);
    let mut out = Vec::new();

    // Transform unitarity and round trip
    {
        let p = DaftParams::new(64, 1.0 / 64.0, 0.0).unwrap();
        let phi = daft_matrix(&p);
        let unit_err = phi
            .matmul(&phi.adjoint())
            .frobenius_distance(&crate::mat::CMat::identity(64));
        let x = random_vec(512, &mut rng);
        let p512 = DaftParams::new(512, 1.0 / 512.0, 0.0).unwrap();
        let rt = rel_l2_error(&daft(&idaft(&x, &p512), &p512), &x);
        out.push(check(
            "daft-unitarity",
            unit_err < 1e-10 * 64.0 && rt < 1e-12,
            format!("‖ΦΦᴴ−I‖_F = {unit_err:.3e} (N=64), round trip {rt:.3e} (N=512)"),
        ));
    }

    // Dirichlet closed form vs direct summation
    {
        let n = 512;
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let k = (rng.random::<f64>() - 0.5) * 2.0 * n as f64;
            let direct: Complex64 = (0..n)
                .map(|i| {
                    Complex64::from_polar(1.0, std::f64::consts::TAU * i as f64 * k / n as f64)
                })
                .sum();
            worst = worst.max((crate::transforms::dirichlet(k, n) - direct).norm());
        }
        out.push(check(
            "dirichlet-closed-form",
            worst < 1e-9,
            format!("max |closed − direct| = {worst:.3e} over 200 draws"),
        ));
    }

    // CPP coincides with a CP under the frame constraints
    {
        let p = DaftParams::new(64, 1.0 / 64.0, 0.0).unwrap();
        let x = random_vec(64, &mut rng);
        let frame = modulate(&x, &p, 16).unwrap();
        let ok = (0..16).all(|i| (frame.s_cpp[i] - frame.s[48 + i]).norm() < 1e-12);
        out.push(check("cpp-equals-cp", ok, "prefix equals the last L_cpp samples".into()));
    }

    // Composition filter Nyquist zeros
    {
        let pc = PulseConfig::new(0.1, 1.0, 1e-3).unwrap();
        let worst = (1..=pc.d() as i64 / 2)
            .map(|d| composition_filter(d as f64, &pc).abs())
            .fold(0.0f64, f64::max);
        out.push(check(
            "raised-cosine-nyquist",
            worst < 1e-12,
            format!("max |g(dT_s)| = {worst:.3e}, D = {}", pc.d()),
        ));
    }

    // Cross-domain matrix consistency at N = 64
    {
        let sys = test_system(64);
        let pc = sys.pulse_config().unwrap();
        let p = sys.daft_params().unwrap();
        let mut worst_fd = 0.0f64;
        let mut worst_daft = 0.0f64;
        for _ in 0..3 {
            let ch =
                sample_channel(&ChannelProfile::eva(), 6e9, 500.0 / 3.6, &mut rng, &sys).unwrap();
            let ht = td_channel_matrix(&ch, &sys, &pc);
            let hf = fd_channel_matrix(&ch, &sys, &pc);
            let hd = crate::channel::daft_channel_matrix(&ch, &sys, &pc, &p);
            let f = daft_matrix(&DaftParams::dft(64).unwrap());
            let phi = daft_matrix(&p);
            let fd_oracle = f.matmul(&ht.entries).matmul(&f.adjoint());
            let daft_oracle = phi.matmul(&ht.entries).matmul(&phi.adjoint());
            let hn = ht.entries.frobenius_norm();
            worst_fd = worst_fd.max(hf.entries.frobenius_distance(&fd_oracle) / hn);
            worst_daft = worst_daft.max(hd.entries.frobenius_distance(&daft_oracle) / hn);
        }
        out.push(check(
            "cross-domain-consistency",
            worst_fd < 1e-10 && worst_daft < 1e-10,
            format!("‖Ḣ−FHFᴴ‖/‖H‖ ≤ {worst_fd:.3e}, ‖Ḧ−ΦHΦᴴ‖/‖H‖ ≤ {worst_daft:.3e}"),
        ));
    }

    // Continuous-time oracle vs analytic TD matrix
    {
        let sys = test_system(64);
        let pc = PulseConfig::new(0.1, sys.ts(), 1e-4).unwrap();
        let p = sys.daft_params().unwrap();
        let mut worst = 0.0f64;
        for _ in 0..2 {
            let ch =
                sample_channel(&ChannelProfile::eva(), 6e9, 500.0 / 3.6, &mut rng, &sys).unwrap();
            let x = random_vec(64, &mut rng);
            let l_cpp = pc.d() / 2 + ch.l_max.ceil() as usize + 1;
            let frame = modulate(&x, &p, l_cpp.min(64)).unwrap();
            let h = td_channel_matrix(&ch, &sys, &pc);
            let predicted = h.entries.mul_vec(&frame.s);
            let oracle = oversampled_propagate(&frame, &ch, &pc, 16, 0.0, &mut rng);
            worst = worst.max(rel_l2_error(&predicted, &oracle));
        }
        out.push(check(
            "continuous-time-oracle",
            worst < 1e-2,
            format!("matrix vs waveform relative error ≤ {worst:.3e}"),
        ));
    }

    // Banded stage 1 equals dense LMMSE on a fully banded matrix
    {
        let n = 16;
        let mut hb = CyclicBandedMatrix::zeros(n, 3, 3).unwrap();
        for d in -3i64..=3 {
            for col in 0..n {
                *hb.diag_entry_mut(d, col) =
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        let r = random_vec(n, &mut rng);
        let banded = stage1_banded_lmmse(&hb, &r, 0.05).unwrap();
        let dense = full_block_lmmse(
            &crate::channel::ChannelMatrix {
                domain: crate::channel::Domain::Frequency,
                entries: hb.to_dense(),
            },
            &r,
            0.05,
        )
        .unwrap();
        let rel = rel_l2_error(&banded.s_hat, &dense);
        out.push(check(
            "banded-vs-dense-lmmse",
            rel < 1e-8,
            format!("lossless-band equivalence error {rel:.3e}"),
        ));
    }

    // Hard fallback equals soft with zero off-center variances
    {
        let n = 20;
        let mut hb = CyclicBandedMatrix::zeros(n, 2, 2).unwrap();
        for d in -2i64..=2 {
            for col in 0..n {
                *hb.diag_entry_mut(d, col) =
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        let r = random_vec(n, &mut rng);
        let s_bar = random_vec(n, &mut rng);
        let zeros = vec![0.0; n];
        let (soft, _) = local_mmse_sweep(&hb, &r, &s_bar, &zeros, 0.07, 2, SweepMode::Soft).unwrap();
        let (hard, _) = local_mmse_sweep(&hb, &r, &s_bar, &zeros, 0.07, 2, SweepMode::Hard).unwrap();
        let worst = soft
            .iter()
            .zip(&hard)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        out.push(check(
            "hard-fallback-identity",
            worst < 1e-10,
            format!("max |soft − hard| = {worst:.3e}"),
        ));
    }

    // Complexity closed forms
    {
        let m = complexity_model(512, 7, 4).unwrap();
        let ok = m.eta0.sixths() == 693_869
            && m.eta_soft.sixths() == 6 * 179_456
            && m.eta_hard.sixths() == 6 * 20_992;
        out.push(check(
            "complexity-closed-forms",
            ok,
            format!(
                "η₀ = {}, η_soft = {}, η_hard = {} (N=512, β=7, |X|=4)",
                m.eta0.to_exact_string(),
                m.eta_soft.to_exact_string(),
                m.eta_hard.to_exact_string()
            ),
        ));
    }

    // DFT degenerate chirps
    {
        let p0 = DaftParams::dft(128).unwrap();
        let v = random_vec(128, &mut rng);
        let a = daft(&v, &p0);
        let b = dft_unitary(&v);
        let worst = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0f64, f64::max);
        let back = rel_l2_error(&idft_unitary(&b), &v);
        out.push(check(
            "chirp-degeneracy",
            worst < 1e-12 && back < 1e-12,
            format!("max |daft₀ − dft| = {worst:.3e}"),
        ));
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_battery_passes() {
        let checks = run_validation();
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert!(checks.len() >= 9);
    }
}
