use super::assembly::SpatialQuadrature;
use super::field::SpaceTimeField;
use super::quadrature::GaussRule;

/// ∫_{I_m}∫_Ω (u_m - exact)² by `q_time` Gauss points per slab and the
/// spatial quadrature per element.
pub fn slab_error_sq<F: Fn(f64, f64) -> f64>(
    field: &SpaceTimeField,
    slab: usize,
    exact: &F,
    quad: &SpatialQuadrature,
    rule: &GaussRule,
) -> f64 {
    let (t0, t1) = field.mesh().time.slab(slab);
    let uq = quad.interpolate(field.kind(), field.row(slab));
    let mut total = 0.0;
    for (t, wt) in rule.mapped(t0, t1) {
        let s: f64 = uq
            .iter()
            .zip(quad.points())
            .zip(quad.weights())
            .map(|((u, &x), w)| {
                let e = u - exact(t, x);
                w * e * e
            })
            .sum();
        total += wt * s;
    }
    total
}

/// Squared L²(I; L²(Ω)) distance between a dG(0)×P1 field and a function.
pub fn space_time_error_sq<F: Fn(f64, f64) -> f64 + Sync>(
    field: &SpaceTimeField,
    exact: &F,
    quad: &SpatialQuadrature,
    q_time: usize,
) -> f64 {
    let rule = GaussRule::new(q_time);
    (0..field.num_rows())
        .map(|m| slab_error_sq(field, m, exact, quad, &rule))
        .sum()
}
