//! Discrete geometric conservation law: the Jacobian is evolved as a nodal
//! ODE driven by the DG divergence of the mesh-velocity flux.

use crate::basis::QuadratureRule;
use crate::error::{Error, Result};
use crate::mesh::{dot, FaceLink, GeometryAtTime, Mesh, Vec3};
use crate::scalar::{lit, Real};
use crate::tensor::{apply_along, face_node, node_coords};

/// Nodal GCL flux `Psi^i = -(J a^i . x_t)`.
pub fn gcl_flux<T: Real>(geometry: &GeometryAtTime<T>) -> Vec<Vec3<T>> {
    geometry
        .contravariant
        .iter()
        .zip(&geometry.velocities)
        .map(|(ja, v)| std::array::from_fn(|i| -dot(ja[i], *v)))
        .collect()
}

/// `J_t = -div Psi` at every node, derivatives by `D`.
pub fn jdot_pointwise<T: Real>(psi: &[Vec3<T>], rule: &QuadratureRule<T>) -> Vec<T> {
    let n = rule.n_points();
    let nn = psi.len();
    let mut out = vec![T::zero(); nn];
    let mut comp = vec![T::zero(); nn];
    let mut tmp = vec![T::zero(); nn];
    for dir in 0..3 {
        for (c, p) in comp.iter_mut().zip(psi) {
            *c = p[dir];
        }
        apply_along(rule.d(), n, dir, 1, &comp, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o = *o - *t;
        }
    }
    out
}

/// Outward reference-normal traces `Psi . n` on the six faces, `[face][a + n b]`.
pub fn face_traces<T: Real>(psi: &[Vec3<T>], n: usize) -> [Vec<T>; 6] {
    std::array::from_fn(|face| {
        let dir = face / 2;
        let sign = if face % 2 == 0 { -T::one() } else { T::one() };
        let mut v = Vec::with_capacity(n * n);
        for b in 0..n {
            for a in 0..n {
                v.push(sign * psi[face_node(n, face, a, b)][dir]);
            }
        }
        v
    })
}

/// `J_t` from the weak form with quadrature:
/// `(J_t, phi)_N + <Psi . n, phi>_N - (Psi, grad phi)_N = 0` for every nodal
/// test function. `traces` are outward `Psi . n` values as in [`face_traces`].
pub fn jdot_weak<T: Real>(psi: &[Vec3<T>], traces: &[Vec<T>; 6], rule: &QuadratureRule<T>) -> Vec<T> {
    let n = rule.n_points();
    let w = rule.weights();
    let dhat = rule.dhat();
    let mut out = vec![T::zero(); psi.len()];
    let mut comp = vec![T::zero(); psi.len()];
    let mut tmp = vec![T::zero(); psi.len()];
    for dir in 0..3 {
        for (c, p) in comp.iter_mut().zip(psi) {
            *c = p[dir];
        }
        apply_along(dhat, n, dir, 1, &comp, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o = *o - *t;
        }
    }
    for (node, o) in out.iter_mut().enumerate() {
        let ijk = node_coords(n, node);
        for dir in 0..3 {
            let (a, b) = in_face(ijk, dir);
            if ijk[dir] == 0 {
                *o = *o - traces[2 * dir][a + n * b] / w[0];
            }
            if ijk[dir] == n - 1 {
                *o = *o - traces[2 * dir + 1][a + n * b] / w[n - 1];
            }
        }
    }
    out
}

#[inline(always)]
fn in_face(ijk: [usize; 3], dir: usize) -> (usize, usize) {
    match dir {
        0 => (ijk[1], ijk[2]),
        1 => (ijk[0], ijk[2]),
        _ => (ijk[0], ijk[1]),
    }
}

/// Weak-form `J_t` for every element of `mesh` at `t`, using local face
/// traces after checking that neighbours agree on `Psi . n`.
pub fn assemble_weak_jdot<T: Real>(mesh: &Mesh<T>, t: T) -> Result<Vec<Vec<T>>> {
    let rule = mesh.rule();
    let n = rule.n_points();
    let geos = (0..mesh.n_elements())
        .map(|e| mesh.geometry_at(e, t))
        .collect::<Result<Vec<_>>>()?;
    let psis: Vec<_> = geos.iter().map(gcl_flux).collect();
    let traces: Vec<_> = psis.iter().map(|p| face_traces(p, n)).collect();
    for (e, el) in mesh.elements().iter().enumerate() {
        for (face, link) in el.neighbors.iter().enumerate() {
            if let FaceLink::Interior { element, face: nf, .. } = *link {
                check_watertight(&traces[e][face], &traces[element][nf])
                    .map_err(|m| Error::Geometry(format!("face {face} of element {e}: {m}")))?;
            }
        }
    }
    Ok(psis
        .iter()
        .zip(&traces)
        .map(|(p, tr)| jdot_weak(p, tr, rule))
        .collect())
}

/// Outward traces from the two sides of a face must cancel.
pub fn check_watertight<T: Real>(mine: &[T], theirs: &[T]) -> std::result::Result<(), String> {
    let tol: T = lit(1e-10);
    let scale = mine.iter().fold(T::one(), |m, v| m.max(v.abs()));
    for (a, b) in mine.iter().zip(theirs) {
        if (*a + *b).abs() > tol * scale {
            return Err(format!(
                "mesh-velocity flux {:e} does not match neighbour value {:e}",
                a.to_f64().unwrap_or(f64::NAN),
                (-*b).to_f64().unwrap_or(f64::NAN)
            ));
        }
    }
    Ok(())
}

/// `sum W (J_t - sum_i D_i (J a^i . x_t)) v` for nodal test values `v`.
pub fn wdgcl_residual<T: Real>(jdot: &[T], psi: &[Vec3<T>], v: &[T], rule: &QuadratureRule<T>) -> T {
    let n = rule.n_points();
    let w = rule.weights();
    let pointwise = jdot_pointwise(psi, rule);
    let mut acc = T::zero();
    for node in 0..jdot.len() {
        let [i, j, k] = node_coords(n, node);
        acc = acc + w[i] * w[j] * w[k] * (jdot[node] - pointwise[node]) * v[node];
    }
    acc
}
