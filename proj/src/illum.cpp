#include "qtat/illum.hpp"

#include <cmath>

#include "qtat/errors.hpp"

namespace qtat {

namespace {

// Deterministic unit vector orthogonal to e: Gram-Schmidt on the axis least
// aligned with e (first axis on ties).
Vec3d orthogonal_unit(const Vec3d& e) {
  int best = 0;
  for (int a = 1; a < 3; ++a)
    if (std::abs(e[a]) < std::abs(e[best]) - 1e-15) best = a;
  Vec3d u = Vec3d::Unit(best);
  u -= u.dot(e) * e;
  return u.normalized();
}

}  // namespace

PlaneWaveParams plane_wave_params(cplx q0, const Vec3d& eta_dir) {
  if (q0 == cplx(0.0)) throw DegenerateInput("q0 must be nonzero");
  const double en = eta_dir.norm();
  if (!(en > 1e-12)) throw DegenerateInput("eta direction is (numerically) zero");
  const Vec3d eta = eta_dir / en;
  // a + i b = principal sqrt(q0): a^2 - b^2 = Re q0, 2ab = Im q0
  const double r = std::abs(q0);
  const double a = std::sqrt(std::max(0.0, 0.5 * (r + q0.real())));
  const double b = a > 0.0 ? q0.imag() / (2.0 * a) : std::sqrt(std::max(0.0, 0.5 * (r - q0.real())));
  const Vec3d u = orthogonal_unit(eta);
  PlaneWaveParams p;
  p.zeta = cplx(a, b) * u.cast<cplx>();
  p.eta = eta.cast<cplx>();
  p.q0 = q0;
  return p;
}

VectorField plane_wave_field(const Grid& g, const PlaneWaveParams& p, const Vec3d& origin) {
  VectorField E(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto [i, j, k] = g.unravel(n);
    const auto x = g.coord(i, j, k);
    const Vec3d xr(x[0] - origin[0], x[1] - origin[1], x[2] - origin[2]);
    const cplx phase = std::exp(cplx(0.0, 1.0) * (p.zeta.transpose() * xr.cast<cplx>())(0));
    E.set(n, p.eta * phase);
  }
  return E;
}

CgoParams cgo_params(double s, const Vec3d& rho, const Vec3d& rho_perp, double k, std::optional<Vec3c> a_vec,
                     std::optional<Vec3c> b_vec) {
  if (!(s > 0.0) || !(k > 0.0)) throw ParamError("cgo_params needs s > 0 and k > 0");
  if (std::abs(rho.norm() - 1.0) > 1e-12 || std::abs(rho_perp.norm() - 1.0) > 1e-12)
    throw ParamError("rho and rho_perp must be unit vectors");
  if (std::abs(rho.dot(rho_perp)) > 1e-12) throw OrthogonalityError("rho and rho_perp are not orthogonal");
  const cplx I(0.0, 1.0);
  CgoParams c;
  c.s = s;
  c.rho = rho;
  c.rho_perp = rho_perp;
  c.k = k;
  c.zeta = -I * s * rho.cast<cplx>() + std::sqrt(s * s + k * k) * rho_perp.cast<cplx>();
  c.zeta_inf = (-I * rho.cast<cplx>() + rho_perp.cast<cplx>()) / std::sqrt(2.0);
  c.a_vec = a_vec ? *a_vec : Vec3c(c.zeta_inf.conjugate());
  c.b_vec = b_vec ? *b_vec : Vec3c::Zero();
  const Vec3c& z = c.zeta;
  const cplx za = (z.transpose() * c.a_vec)(0);
  c.eta_zeta = (-za * z - k * cross(z, c.b_vec) + k * k * c.a_vec) / z.norm();
  return c;
}

DirectionFamily direction_family(int n_dim) {
  if (n_dim < 3) throw DimensionError("direction_family needs n_dim >= 3");
  const auto e = [n_dim](int a) { return Eigen::VectorXd::Unit(n_dim, a); };
  DirectionFamily f;
  f.n_dim = n_dim;
  for (int j = 0; j < n_dim - 1; ++j) f.pairs.push_back({e(n_dim - 1), e(j)});
  f.pairs.push_back({e(n_dim - 1), (e(0) + e(1)) / std::sqrt(2.0)});
  f.pairs.push_back({e(0), (e(1) + e(n_dim - 1)) / std::sqrt(2.0)});
  return f;
}

std::vector<PlaneWaveParams> plane_wave_family(cplx q0, const DirectionFamily& fam) {
  if (fam.n_dim != 3) throw DimensionError("plane waves are built in 3D only");
  std::vector<PlaneWaveParams> out;
  for (const auto& pr : fam.pairs) out.push_back(plane_wave_params(q0, Vec3d(pr.rho_perp)));
  return out;
}

BoundaryIllumination boundary_trace(const VectorField& E) {
  const Grid& g = E.grid;
  BoundaryIllumination f = zero_illumination(g);
  for (int face = 0; face < 6; ++face) {
    const auto ax = face_axes(face);
    const Vec3c nu = face_normal(face).cast<cplx>();
    for (int u = 0; u < g.dims[ax[0]]; ++u)
      for (int v = 0; v < g.dims[ax[1]]; ++v) {
        const std::size_t s = static_cast<std::size_t>(u) * g.dims[ax[1]] + v;
        Vec3c t = cross(nu, E.at(face_node_to_grid(g, face, u, v)));
        t[face / 2] = 0.0;  // exact zero rather than rounding noise
        f.faces[face].segment<3>(3 * s) = t;
      }
  }
  return f;
}

double select_s(double k, const std::function<bool(double)>& accept, int max_doublings) {
  double s = 10.0 * (1.0 + k);
  for (int i = 0; i <= max_doublings; ++i, s *= 2.0)
    if (accept(s)) return s;
  throw NoContraction("no admissible s found after " + std::to_string(max_doublings) + " doublings");
}

}  // namespace qtat
