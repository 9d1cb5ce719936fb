use proptest::prelude::*;
use totc::inner::{solve_inner, InnerOptions};
use totc::linalg::{conjugate_gradient, CgOptions, EnvelopeCholesky};
use totc::mesh::{build_uniform_mesh, build_uniform_timegrid};
use totc::parabolic::solve_state;
use totc::transform::{extend_right, interior_field};
use totc::{DataFunction, Discretization, ProblemSpec, SpaceTimeField};

fn field_from(disc: &Discretization, values: &[f64]) -> SpaceTimeField {
    let mut v = disc.zero_control();
    v.as_mut_slice().iter_mut().zip(values.iter().cycle()).for_each(|(x, &y)| *x = y);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mesh_counts_and_areas(n_div in 2usize..20) {
        let mesh = build_uniform_mesh::<f64>(n_div).unwrap();
        prop_assert_eq!(mesh.num_nodes(), (n_div + 1) * (n_div + 1));
        prop_assert_eq!(mesh.num_interior(), (n_div - 1) * (n_div - 1));
        prop_assert_eq!(mesh.num_elements(), 2 * n_div * n_div);
        let total: f64 = (0..mesh.num_elements()).map(|k| mesh.signed_area(k)).sum();
        prop_assert!((0..mesh.num_elements()).all(|k| mesh.signed_area(k) > 0.0));
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn state_is_linear_in_the_control(
        t in 0.01f64..2.0,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        v1 in prop::collection::vec(-1.0f64..3.0, 8),
        v2 in prop::collection::vec(-1.0f64..3.0, 5),
    ) {
        let disc = Discretization::uniform(4, 3).unwrap();
        let spec = ProblemSpec { y0: DataFunction::Zero, ..ProblemSpec::paper_example() };
        let (f1, f2) = (field_from(&disc, &v1), field_from(&disc, &v2));
        let mut combo = f1.clone();
        combo.as_mut_slice().iter_mut().zip(f2.as_slice()).for_each(|(x, &y)| *x = a * *x + b * y);
        let s1 = solve_state(t, &f1, &spec, &disc).unwrap();
        let s2 = solve_state(t, &f2, &spec, &disc).unwrap();
        let sc = solve_state(t, &combo, &spec, &disc).unwrap();
        for ((z, x), y) in sc.field.as_slice().iter().zip(s1.field.as_slice()).zip(s2.field.as_slice()) {
            prop_assert!((z - (a * x + b * y)).abs() <= 1e-10 * (1.0 + z.abs()));
        }
    }

    #[test]
    fn free_evolution_is_stable(t in 1e-3f64..100.0, m in 1usize..12, n_div in 2usize..9) {
        let disc = Discretization::uniform(n_div, m).unwrap();
        let st = solve_state(t, &disc.zero_control(), &ProblemSpec::paper_example(), &disc).unwrap();
        let mut prev = disc.norm_int(&st.initial);
        for z in st.field.steps() {
            let cur = disc.norm_int(z);
            prop_assert!(cur <= prev * (1.0 + 1e-12));
            prev = cur;
        }
    }

    #[test]
    fn inner_solution_is_feasible_and_descends(t in 0.005f64..0.5) {
        let disc = Discretization::uniform(5, 6).unwrap();
        let spec = ProblemSpec::paper_example();
        let r = solve_inner(t, &spec, &disc, &InnerOptions::default()).unwrap();
        prop_assert!(r.v_opt.as_slice().iter().all(|&v| spec.a <= v && v <= spec.b));
        prop_assert!(r.objective_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(r.delta >= -spec.lambda);
        prop_assert!(r.gap >= -1e-12);
    }

    #[test]
    fn direct_and_iterative_solves_agree(t in 1e-3f64..10.0, n_div in 2usize..12, seed in 0u64..1000) {
        let disc = Discretization::uniform(n_div, 1).unwrap();
        let k = disc.mass_int.linear_combination(1.0 + 0.2 * t, &disc.stiffness_int, t);
        let n = k.dim();
        let rhs: Vec<f64> = (0..n).map(|i| ((i as u64 * 2654435761 + seed) % 97) as f64 / 97.0 - 0.5).collect();
        let mut direct = rhs.clone();
        EnvelopeCholesky::factor(&k).unwrap().solve_in_place(&mut direct);
        let mut iterative = vec![0.0; n];
        conjugate_gradient(&k, &rhs, &mut iterative, CgOptions::default()).unwrap();
        let scale = direct.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        for (d, i) in direct.iter().zip(&iterative) {
            prop_assert!((d - i).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn right_extension_is_constant_after_the_horizon(t in 0.01f64..5.0, q in 1.0f64..10.0) {
        let g = build_uniform_timegrid::<f64>(3).unwrap();
        let y = interior_field(g, vec![vec![1.0], vec![2.0], vec![3.0]]).rescale_time(t);
        prop_assert_eq!(extend_right(&y, t * q), vec![3.0]);
        prop_assert_eq!(extend_right(&y, t), vec![3.0]);
        prop_assert_eq!(extend_right(&y, 0.0), vec![1.0]);
    }
}
