#include "rotdop/beams.hpp"

#include <cmath>
#include <cstdlib>

namespace rotdop {

BeamGeometry BeamGeometry::plane_wave(double wavelength) {
  if (!(wavelength > 0.0)) throw ValidationError("wavelength must be positive");
  BeamGeometry b;
  b.mode_ = BeamMode::PlaneWave;
  b.k_ = kTwoPi / wavelength;
  return b;
}

BeamGeometry BeamGeometry::laguerre_gauss(double wavelength, double waist, int l, int p, double x0,
                                          double y0) {
  if (!(wavelength > 0.0)) throw ValidationError("wavelength must be positive");
  if (!(waist > 0.0)) throw ValidationError("waist must be positive");
  if (p < 0) throw ValidationError("radial index p must be non-negative");
  BeamGeometry b;
  b.mode_ = BeamMode::LaguerreGauss;
  b.k_ = kTwoPi / wavelength;
  b.waist_ = waist;
  b.l_ = l;
  b.p_ = p;
  b.z_r_ = 0.5 * b.k_ * waist * waist;
  b.x0_ = x0;
  b.y0_ = y0;
  return b;
}

BeamGeometry BeamGeometry::with_center(double x0, double y0) const {
  BeamGeometry b = *this;
  b.x0_ = x0;
  b.y0_ = y0;
  return b;
}

BeamGeometry BeamGeometry::with_winding(int l) const {
  BeamGeometry b = *this;
  b.l_ = l;
  return b;
}

BeamGeometry BeamGeometry::with_waist(double waist) const {
  if (mode_ != BeamMode::LaguerreGauss) return *this;
  return laguerre_gauss(wavelength(), waist, l_, p_, x0_, y0_);
}

CylindricalKinematics kinematics_from_cartesian(const BeamGeometry &beam, const Vec3 &position,
                                                const Vec3 &velocity) {
  CylindricalKinematics kin;
  const double x = position[0] - beam.x0();
  const double y = position[1] - beam.y0();
  kin.r = std::hypot(x, y);
  kin.z = position[2];
  kin.v_z = velocity[2];
  if (kin.r == 0.0) {
    kin.phi = 0.0;
    kin.v_r = 0.0;
    kin.v_phi = 0.0;
    kin.azimuthal_singular = velocity[0] != 0.0 || velocity[1] != 0.0;
    return kin;
  }
  kin.phi = std::atan2(y, x);
  const double c = x / kin.r;
  const double s = y / kin.r;
  kin.v_r = c * velocity[0] + s * velocity[1];
  kin.v_phi = -s * velocity[0] + c * velocity[1];
  return kin;
}

double azimuthal_shift(const BeamGeometry &beam, const CylindricalKinematics &kin) {
  if (beam.mode() == BeamMode::PlaneWave || beam.l() == 0) return 0.0;
  if (kin.v_phi == 0.0 && !kin.azimuthal_singular) return 0.0;
  if (kin.r == 0.0)
    throw SingularityError("azimuthal Doppler term diverges on the beam axis (r = 0)");
  return -(beam.l() / kin.r) * kin.v_phi;
}

double lg_doppler_shift(const BeamGeometry &beam, const CylindricalKinematics &kin) {
  const double k = beam.k();
  if (beam.mode() == BeamMode::PlaneWave) return -k * kin.v_z;

  const double z = kin.z;
  const double zr = beam.rayleigh_range();
  const double q = z * z + zr * zr;
  const double r = kin.r;
  const double gouy_order = 2.0 * beam.p() + std::abs(beam.l()) + 1.0;

  // d/dz of k z + k r^2 z / (2 q) - (2p + |l| + 1) atan(z / z_R), i.e. the
  // curvature term enters as (1 - 2 z^2 / q), consistent with the radial term.
  const double longitudinal =
      k + k * r * r / (2.0 * q) * (1.0 - 2.0 * z * z / q) - gouy_order * zr / q;
  const double radial = k * r * z / q;
  return -longitudinal * kin.v_z - radial * kin.v_r + azimuthal_shift(beam, kin);
}

double relative_two_beam_shift(const BeamGeometry &beam1, const BeamGeometry &beam2,
                               const CylindricalKinematics &kin1,
                               const CylindricalKinematics &kin2) {
  return lg_doppler_shift(beam1, kin1) - lg_doppler_shift(beam2, kin2);
}

double plane_wave_shift(double wavelength, const Vec3 &direction, const Vec3 &velocity) {
  const double n = std::sqrt(direction[0] * direction[0] + direction[1] * direction[1] +
                             direction[2] * direction[2]);
  if (!(n > 0.0)) throw ValidationError("beam direction must be non-zero");
  const double k = kTwoPi / wavelength;
  const double kv =
      (direction[0] * velocity[0] + direction[1] * velocity[1] + direction[2] * velocity[2]) / n;
  return -k * kv;
}

double lg_intensity(const BeamGeometry &beam, double r, double z) {
  if (beam.mode() != BeamMode::LaguerreGauss)
    throw ValidationError("lg_intensity requires a Laguerre-Gauss beam");
  if (beam.p() != 0) throw ValidationError("lg_intensity supports p = 0 modes only");
  const double al = std::abs(beam.l());
  const double w0 = beam.waist();
  const double zr = beam.rayleigh_range();
  const double w2 = w0 * w0 * (1.0 + (z / zr) * (z / zr));
  const double u = 2.0 * r * r / w2; // (r sqrt2 / w)^2
  // Radial maximum in the waist plane sits at u = |l| with value |l|^|l| e^-|l|.
  const double peak = al == 0.0 ? 1.0 : std::pow(al, al) * std::exp(-al);
  const double profile = (al == 0.0 ? 1.0 : std::pow(u, al)) * std::exp(-u);
  return (w0 * w0 / w2) * profile / peak;
}

double lg_intensity_peak_radius(const BeamGeometry &beam) {
  return beam.waist() * std::sqrt(std::abs(beam.l()) / 2.0);
}

double sensitivity_scaling(int l, double intensity_ratio) {
  if (l == 0) throw ValidationError("sensitivity scaling needs a non-zero winding number");
  if (intensity_ratio == 0.0)
    throw SingularityError("sensitivity diverges at zero local intensity");
  if (!(intensity_ratio > 0.0 && intensity_ratio <= 1.0))
    throw ValidationError("intensity ratio must lie in (0, 1]");
  return std::pow(1.0 / intensity_ratio, 1.0 / (2.0 * std::abs(l))) * 2.0 * l;
}

} // namespace rotdop
