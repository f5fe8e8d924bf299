use num_complex::Complex64;
use proptest::prelude::*;

use lattwave::calculus::{inner, stencil_laplacian};
use lattwave::energy::{difference_norm_sqr, gradient_norm_sqr, linear_energy};
use lattwave::lattice::{make_box, Field, LatticeBox, WaveState};
use lattwave::solvers::LinearPropagator;
use lattwave::spectral::{dft_forward, dft_inverse, partial};

fn boxes() -> impl Strategy<Value = LatticeBox> {
    (1usize..=3, prop::sample::select(vec![4usize, 6, 8, 10]))
        .prop_map(|(d, l)| make_box(d, l).unwrap())
}

fn field_on(b: LatticeBox) -> impl Strategy<Value = Field> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), b.total()).prop_map(move |v| {
        Field::from_values(b, v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect()).unwrap()
    })
}

fn box_and_fields() -> impl Strategy<Value = (Field, Field)> {
    boxes().prop_flat_map(|b| (field_on(b), field_on(b)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_round_trip((f, _) in box_and_fields()) {
        let back = dft_inverse(&dft_forward(&f));
        prop_assert!(back.max_abs_diff(&f).unwrap() <= 1e-12 * (1.0 + f.sup_norm()));
    }

    #[test]
    fn derivative_is_skew((u, v) in box_and_fields(), axis in 1usize..=3) {
        let axis = axis.min(u.lattice().dim());
        let s = inner(&partial(&u, axis).unwrap(), &v).unwrap()
            + inner(&u, &partial(&v, axis).unwrap()).unwrap();
        prop_assert!(s.norm() <= 1e-11 * (1.0 + u.l2_norm() * v.l2_norm()));
    }

    #[test]
    fn derivative_squares_to_stencil((f, _) in box_and_fields()) {
        let mut sum = Field::zeros(*f.lattice());
        for axis in 1..=f.lattice().dim() {
            sum = sum.add(&partial(&partial(&f, axis).unwrap(), axis).unwrap()).unwrap();
        }
        prop_assert!(sum.max_abs_diff(&stencil_laplacian(&f)).unwrap() <= 1e-11 * (1.0 + f.sup_norm()));
    }

    #[test]
    fn gradient_norms_agree((f, _) in box_and_fields()) {
        let gap = (gradient_norm_sqr(&f) - difference_norm_sqr(&f)).abs();
        prop_assert!(gap <= 1e-10 * (1.0 + f.norm_sqr_sum()));
    }

    #[test]
    fn free_evolution_conserves_energy((u, v) in box_and_fields(), h in 0.01f64..0.5) {
        let prop = LinearPropagator::new(*u.lattice(), h);
        let mut s = WaveState::new(u, v, 0.0).unwrap();
        let e0 = linear_energy(&s).total;
        for _ in 0..20 {
            s = prop.step(&s, None).unwrap();
        }
        prop_assert!((linear_energy(&s).total - e0).abs() <= 1e-11 * (1.0 + e0));
    }

    #[test]
    fn derivative_commutes_with_translation((f, _) in box_and_fields(), shift in 0i64..10) {
        let d = f.lattice().dim();
        let shifted = |g: &Field| Field::from_fn(*g.lattice(), |m| {
            let mut mm = m.to_vec();
            mm[0] += shift;
            g.at(&mm)
        });
        let lhs = partial(&shifted(&f), d).unwrap();
        let rhs = shifted(&partial(&f, d).unwrap());
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-12 * (1.0 + f.sup_norm()));
    }
}
