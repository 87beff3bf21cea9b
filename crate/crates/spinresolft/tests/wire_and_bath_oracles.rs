//! Wire-field and proton-bath closed forms against their numeric oracles.

use approx::assert_relative_eq;
use spinresolft::constants::MU_0;
use spinresolft::fields::{
    b_field, b_magnitude, b_parallel, gradient_parallel, proton_brms, proton_brms_for_axis,
    NVOrientation, ProtonBath, ProjectionConvention, WireGeometry,
};
use spinresolft::oracle::{biot_savart_wire, dipolar_brms_mc};

#[test]
fn wire_field_matches_biot_savart_everywhere_sampled() {
    let wire = WireGeometry::new([0.0, 0.0, 0.0], 12.5e-6, 7e-3, 8.3e3).unwrap();
    for pos in [
        [23.3e-6, 0.0, 26.2e-6],
        [-40e-6, 2e-6, 5e-6],
        [13e-6, -8e-6, -1e-6],
        [0.0, 0.0, 80e-6],
    ] {
        let closed = b_field(pos, &wire).unwrap();
        let oracle = biot_savart_wire(pos, wire.center_m, wire.current_a, 10.0, 96);
        let mag = b_magnitude(pos, &wire).unwrap();
        let r = pos[0].hypot(pos[2]);
        assert_relative_eq!(
            mag,
            MU_0 * wire.current_a / (std::f64::consts::TAU * r),
            max_relative = 1e-14
        );
        for (a, b) in closed.iter().zip(&oracle) {
            assert!(
                (a - b).abs() <= mag * 1e-10,
                "component {a:.6e} vs oracle {b:.6e} at {pos:?}"
            );
        }
    }
}

#[test]
fn richardson_gradient_matches_analytic_derivative() {
    let wire = WireGeometry::new([0.0, 0.0, 0.0], 12.5e-6, 7e-3, 8.3e3).unwrap();
    let nv = NVOrientation::standard();
    let pos = [23.319e-6, 0.0, 26.158e-6];
    // Analytic d/dx of scale·(z·n_x − x·n_z)/(x²+z²).
    let n = nv.axis();
    let (x, z) = (pos[0], pos[2]);
    let r2 = x * x + z * z;
    let a = MU_0 * wire.current_a / std::f64::consts::TAU;
    let analytic = a * (-n[2] * r2 - 2.0 * x * (z * n[0] - x * n[2])) / (r2 * r2);
    let conv = ProjectionConvention::AxisDot;
    let g = |h: f64| gradient_parallel(pos, &wire, &nv, conv, h).unwrap();
    let h = 0.5e-6;
    let richardson = (4.0 * g(h / 2.0) - g(h)) / 3.0;
    assert_relative_eq!(richardson, analytic, max_relative = 1e-6);
    // And the plain central difference at a sane step is already close.
    assert_relative_eq!(g(1e-9), analytic, max_relative = 1e-5);
}

#[test]
fn projection_conventions_differ_away_from_symmetry() {
    // The two conventions are genuinely different models; nothing should
    // quietly bridge them.
    let wire = WireGeometry::new([0.0, 0.0, 0.0], 12.5e-6, 7e-3, 8.3e3).unwrap();
    let nv = NVOrientation::standard();
    let pos = [22.5e-6, 0.0, 20e-6];
    let dot = b_parallel(pos, &wire, &nv, ProjectionConvention::AxisDot).unwrap();
    let angles = b_parallel(pos, &wire, &nv, ProjectionConvention::ComponentAngles).unwrap();
    assert!((dot - angles).abs() > 1e-6, "{dot} vs {angles}");
}

#[test]
fn proton_brms_closed_form_matches_dipolar_monte_carlo() {
    let nv = NVOrientation::standard();
    for (rho, d) in [(5e28, 3e-9), (6.6e28, 2e-9), (1e28, 8e-9)] {
        let bath = ProtonBath::new(rho, d).unwrap();
        let closed = proton_brms(&bath).unwrap();
        let mc = dipolar_brms_mc(&bath, &nv, 400_000, 90);
        assert_relative_eq!(closed, mc, max_relative = 0.01);
    }
    // Off-axis orientation too.
    let tilted = NVOrientation::new(0.3, 1.0).unwrap();
    let bath = ProtonBath::new(5e28, 3e-9).unwrap();
    let closed = proton_brms_for_axis(&bath, &tilted).unwrap();
    let mc = dipolar_brms_mc(&bath, &tilted, 400_000, 91);
    assert_relative_eq!(closed, mc, max_relative = 0.01);
}

#[test]
fn monte_carlo_doubling_is_stable() {
    let bath = ProtonBath::new(5e28, 3e-9).unwrap();
    let nv = NVOrientation::standard();
    let half = dipolar_brms_mc(&bath, &nv, 200_000, 5);
    let full = dipolar_brms_mc(&bath, &nv, 400_000, 5);
    assert!((half - full).abs() / full < 0.01);
}
