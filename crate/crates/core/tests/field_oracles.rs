//! Cross-checks of the density field against the independent reference
//! routes in `oracle`: brute-force evaluation, hard Voronoi labels, and
//! finite differences of the packed design gradient.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vorotop::grid::DomainMask;
use vorotop::neighbor::NeighborIndex;
use vorotop::oracle::{brute_force_density, discrete_voronoi_label, fd_gradient_check};
use vorotop::pipeline::{DesignLayout, DesignVariables};
use vorotop::voronoi::{
    density_at, density_gradients_at, rasterize_density, soft_weights, FieldConfig,
    MetricFactor, SiteSet,
};

fn random_sites(n: usize, extent: [f64; 2], seed: u64) -> SiteSet<f64, 2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n);
    let mut metrics = Vec::with_capacity(n);
    for _ in 0..n {
        positions.push(Vector2::new(
            rng.gen::<f64>() * extent[0],
            rng.gen::<f64>() * extent[1],
        ));
        // Diagonally dominant so the factor stays positive definite.
        let d00 = 0.5 + rng.gen::<f64>();
        let d11 = 0.5 + rng.gen::<f64>();
        let d10 = 0.4 * (rng.gen::<f64>() - 0.5) * d00.min(d11);
        metrics.push(MetricFactor::from_lower_triangle(&[d00, d10, d11]));
    }
    SiteSet::new(positions, metrics).unwrap()
}

#[test]
fn rasterize_is_bitwise_equal_to_brute_force_at_full_neighbor_count() {
    let (nx, ny) = (24, 12);
    let sites = random_sites(12, [nx as f64, ny as f64], 11);
    let mask = DomainMask::all_design(nx, ny).unwrap();
    let index = NeighborIndex::build(&sites);

    for eps in [0.0, 1e-7] {
        let cfg = FieldConfig {
            sharpness: 10.0,
            boundary_weight: eps,
            neighbor_count: sites.len(),
            ..FieldConfig::default()
        };
        let (grid, _) = rasterize_density(&sites, &mask, &cfg, &index, false).unwrap();
        for e in 0..mask.len() {
            let c = grid.centroid(e);
            let point = Vector2::new(c[0], c[1]);
            let reference = brute_force_density(&point, &sites, &cfg);
            assert_eq!(
                grid.value(e).to_bits(),
                reference.to_bits(),
                "element {e} diverged from the reference at eps = {eps}"
            );
        }
    }
}

#[test]
fn soft_weights_partition_unity_over_the_full_site_set() {
    let sites = random_sites(20, [16.0, 8.0], 23);
    let all: Vec<u32> = (0..sites.len() as u32).collect();
    let cfg = FieldConfig {
        sharpness: 10.0,
        neighbor_count: sites.len(),
        ..FieldConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let p = Vector2::new(rng.gen::<f64>() * 16.0, rng.gen::<f64>() * 8.0);
        let w = soft_weights(&p, &sites, &all, &cfg);
        assert!(
            (w.total() - 1.0).abs() < 1e-12,
            "weights summed to {} at {:?}",
            w.total(),
            p
        );
    }
}

#[test]
fn dominant_weight_matches_the_hard_voronoi_label() {
    let sites = random_sites(15, [10.0, 10.0], 41);
    let all: Vec<u32> = (0..sites.len() as u32).collect();
    let cfg = FieldConfig {
        sharpness: 10.0,
        neighbor_count: sites.len(),
        ..FieldConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut compared = 0;
    for _ in 0..500 {
        let p = Vector2::new(rng.gen::<f64>() * 10.0, rng.gen::<f64>() * 10.0);
        let (label, margin) = discrete_voronoi_label(&p, &sites);
        if margin < 1e-9 {
            continue; // Ambiguous points have no well-defined winner.
        }
        compared += 1;
        let w = soft_weights(&p, &sites, &all, &cfg);
        let argmax = w
            .site_weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(
            all[argmax] as usize, label,
            "softmax winner disagreed with the hard label at {:?}",
            p
        );
    }
    assert!(compared > 450, "nearly all samples should be unambiguous");
}

#[test]
fn midline_density_between_twin_sites_is_exact() {
    // Symmetric pair, isotropic shared metric: the midline weights are
    // exactly (0.5, 0.5), so rho = 1 - 2 * 0.5^beta in closed form.
    let sites = SiteSet::with_uniform_metric(
        vec![Vector2::new(2.0, 3.0), Vector2::new(6.0, 3.0)],
        MetricFactor::isotropic(1.0),
    )
    .unwrap();
    let ids = [0u32, 1];
    for beta in [1.0, 10.0, 50.0] {
        let cfg = FieldConfig {
            sharpness: beta,
            neighbor_count: 2,
            ..FieldConfig::default()
        };
        let expected = 1.0 - 2.0 * 0.5f64.powf(beta);
        for y in [0.5, 2.0, 3.0, 5.5] {
            let rho = density_at(&Vector2::new(4.0, y), &sites, &ids, &cfg);
            assert!(
                (rho - expected).abs() < 1e-12,
                "beta {beta}: midline density {rho} vs expected {expected}"
            );
        }
    }
}

#[test]
fn anisotropic_metric_stretches_the_free_boundary_accordingly() {
    // One site, virtual competitor on: the solid region is the metric ball
    // d(x) <= t for a fixed threshold t, an ellipse with semi-axes t/d00
    // and t/d11. A 2:1 factor ratio must give a 1:2 bounding box.
    let (nx, ny) = (64, 64);
    let sites = SiteSet::new(
        vec![Vector2::new(32.0, 32.0)],
        vec![MetricFactor::from_lower_triangle(&[2.0, 0.0, 1.0])],
    )
    .unwrap();
    let mask = DomainMask::all_design(nx, ny).unwrap();
    let index = NeighborIndex::build(&sites);
    let cfg = FieldConfig {
        sharpness: 10.0,
        boundary_weight: 1e-3,
        neighbor_count: 1,
        ..FieldConfig::default()
    };
    let (grid, _) = rasterize_density(&sites, &mask, &cfg, &index, false).unwrap();

    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (nx, 0usize, ny, 0usize);
    for e in 0..mask.len() {
        if grid.value(e) > 0.5 {
            let (ex, ey) = (e % nx, e / nx);
            x_lo = x_lo.min(ex);
            x_hi = x_hi.max(ex);
            y_lo = y_lo.min(ey);
            y_hi = y_hi.max(ey);
        }
    }
    let width = (x_hi - x_lo + 1) as f64;
    let height = (y_hi - y_lo + 1) as f64;
    assert!(width > 2.0, "solid region should span several elements");
    let aspect = height / width;
    assert!(
        (aspect - 2.0).abs() < 0.25,
        "semi-axis ratio should track the factor ratio, got {aspect}"
    );
}

/// Finite differences of the packed design vector against the assembled
/// analytic gradient, with the density at a probe point as the objective.
/// Exercises position gradients, metric gradients, the symmetric
/// parameterization (off-diagonal doubling), and the virtual site.
#[test]
fn packed_design_gradient_matches_finite_differences() {
    let probes = [
        Vector2::new(3.1, 2.2),
        Vector2::new(5.0, 4.9),
        Vector2::new(0.7, 3.3),
    ];
    for (case, &eps) in [0.0, 1e-7].iter().enumerate() {
        for (pcase, probe) in probes.iter().enumerate() {
            let sites = random_sites(5, [8.0, 6.0], 100 + case as u64);
            let cfg = FieldConfig {
                sharpness: 8.0,
                boundary_weight: eps,
                neighbor_count: sites.len(),
                ..FieldConfig::default()
            };
            let all: Vec<u32> = (0..sites.len() as u32).collect();
            let layout = DesignLayout::new(sites.len(), DesignVariables::PositionsAndMetrics);
            let x0 = layout.pack(&sites);

            let g = density_gradients_at(probe, &sites, &all, &cfg);
            // Slots are in neighbor order == site order here (k = N).
            let analytic = layout.pack_gradients(&g.wrt_position, &g.wrt_metric);

            let mut scratch = sites.clone();
            let report = fd_gradient_check(&x0, &analytic, 1e-6, 1e-8, |x| {
                layout.unpack(x, &mut scratch).unwrap();
                density_at(probe, &scratch, &all, &cfg)
            });
            assert!(report.checked > 0, "probe {pcase} checked nothing");
            assert!(
                report.max_rel_error < 1e-4,
                "eps {eps}, probe {pcase}: rel error {} at component {} \
                 (analytic {}, numeric {})",
                report.max_rel_error,
                report.worst_index,
                report.worst_analytic,
                report.worst_numeric
            );
        }
    }
}
