//! Structural properties of the forward transform and the differencing stencils.

use proptest::prelude::*;
use vline::geometry::Orientation;
use vline::{
    accumulate_cone_integral, alternating_average, compare_fields, forward_broken_ray, invert_mixed_partial,
    make_phantom, ConeFrame2, DiffMode, DiffScheme, Grid, PhantomSpec, ScalarField,
};

fn orientation(k: usize) -> Orientation {
    [Orientation::Up, Orientation::Down, Orientation::Left, Orientation::Right][k % 4]
}

fn gaussian(grid: &Grid, center: [f64; 2], width: f64) -> ScalarField {
    make_phantom(&PhantomSpec::Gaussian { amplitude: 1.0, center: center.to_vec(), width }, grid).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forward_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, beta in 0.3f64..1.3, k in 0usize..4) {
        let grid = Grid::unit(&[33, 33]).unwrap();
        let frame = ConeFrame2::symmetric(orientation(k).axis(), beta).unwrap();
        let f1 = gaussian(&grid, [0.4, 0.6], 0.15);
        let f2 = make_phantom(&PhantomSpec::Disk { amplitude: 1.0, center: vec![0.55, 0.45], radius: 0.25 }, &grid).unwrap();
        let step = grid.default_step();
        let g1 = forward_broken_ray(&f1, &frame, step).unwrap();
        let g2 = forward_broken_ray(&f2, &frame, step).unwrap();
        let mix = forward_broken_ray(&f1.combine(a, &f2, b).unwrap(), &frame, step).unwrap();
        let expected = g1.field.combine(a, &g2.field, b).unwrap();
        for (x, y) in mix.field.samples().iter().zip(expected.samples()) {
            prop_assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn forward_of_nonnegative_field_is_nonnegative(beta in 0.2f64..1.4, k in 0usize..4, r in 0.05f64..0.4) {
        let grid = Grid::unit(&[25, 25]).unwrap();
        let frame = ConeFrame2::symmetric(orientation(k).axis(), beta).unwrap();
        let f = make_phantom(&PhantomSpec::Disk { amplitude: 2.0, center: vec![0.5, 0.5], radius: r }, &grid).unwrap();
        let g = forward_broken_ray(&f, &frame, grid.default_step()).unwrap();
        prop_assert!(g.field.min() >= 0.0);
    }

    #[test]
    fn forward_commutes_with_lattice_shifts(beta in 0.3f64..1.3, k in 0usize..4, di in -4i64..=4, dj in -4i64..=4) {
        let n = 41;
        let grid = Grid::unit(&[n, n]).unwrap();
        let h = grid.spacing()[0];
        let frame = ConeFrame2::symmetric(orientation(k).axis(), beta).unwrap();
        let c = [0.5, 0.5];
        let shifted = [c[0] + di as f64 * h, c[1] + dj as f64 * h];
        let step = grid.default_step();
        let g = forward_broken_ray(&gaussian(&grid, c, 0.05), &frame, step).unwrap();
        let gs = forward_broken_ray(&gaussian(&grid, shifted, 0.05), &frame, step).unwrap();
        let margin = 5;
        for i in margin..n - margin {
            for j in margin..n - margin {
                let (si, sj) = ((i as i64 + di) as usize, (j as i64 + dj) as usize);
                let (a, b) = (g.field.at(&[i, j]), gs.field.at(&[si, sj]));
                prop_assert!((a - b).abs() <= 1e-10, "({i},{j}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn alternating_average_is_the_inversion_stencil(i in 8usize..25, j in 8usize..25) {
        let grid = Grid::unit(&[33, 33]).unwrap();
        let frame = ConeFrame2::symmetric(Orientation::Up.axis(), 1.0).unwrap();
        let g = forward_broken_ray(&gaussian(&grid, [0.5, 0.5], 0.15), &frame, grid.default_step()).unwrap();
        let big_f = accumulate_cone_integral(&g, &frame).unwrap();
        let scheme = DiffScheme::default_for(&grid, DiffMode::MixedPartial);
        let f = invert_mixed_partial(&big_f, &scheme).unwrap();
        let x = grid.point(grid.flat_index(&[i, j]));
        prop_assert_eq!(alternating_average(&big_f, &x, &[scheme.t, scheme.t]), f.at(&[i, j]));
    }
}

#[test]
fn halving_the_quadrature_step_quarters_the_error() {
    let grid = Grid::unit(&[65, 65]).unwrap();
    let f = gaussian(&grid, [0.5, 0.5], 0.15);
    let frame = ConeFrame2::symmetric(Orientation::Down.axis(), 0.8).unwrap();
    let h = grid.min_spacing();
    let run = |step: f64| forward_broken_ray(&f, &frame, step).unwrap().field;
    let reference = run(h / 64.0);
    let err = |step: f64| compare_fields(&run(step), &reference, None).unwrap().l2_rel;
    let ratio = err(h) / err(h / 2.0);
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}
