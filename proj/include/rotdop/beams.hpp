#pragma once

// Laguerre-Gauss beam geometry, intensity profiles and Doppler shifts of a
// moving emitter in the beam's phase gradient.

#include <array>

#include "rotdop/units.hpp"

namespace rotdop {

using Vec3 = std::array<double, 3>;

enum class BeamMode { PlaneWave, LaguerreGauss };

class BeamGeometry {
public:
  /// Plane wave travelling along +z.
  static BeamGeometry plane_wave(double wavelength);
  /// LG_p^l mode travelling along +z with its axis displaced by (x0, y0).
  static BeamGeometry laguerre_gauss(double wavelength, double waist, int l, int p = 0,
                                     double x0 = 0.0, double y0 = 0.0);

  BeamMode mode() const { return mode_; }
  double k() const { return k_; }
  double waist() const { return waist_; }
  int l() const { return l_; }
  int p() const { return p_; }
  double rayleigh_range() const { return z_r_; }
  double x0() const { return x0_; }
  double y0() const { return y0_; }
  double wavelength() const { return kTwoPi / k_; }

  BeamGeometry with_center(double x0, double y0) const;
  BeamGeometry with_winding(int l) const;
  BeamGeometry with_waist(double waist) const;

private:
  BeamGeometry() = default;

  BeamMode mode_ = BeamMode::PlaneWave;
  double k_ = 0.0;
  double waist_ = 0.0;
  int l_ = 0;
  int p_ = 0;
  double z_r_ = 0.0;
  double x0_ = 0.0;
  double y0_ = 0.0;
};

struct CylindricalKinematics {
  double r = 0.0;
  double phi = 0.0;
  double z = 0.0;
  double v_r = 0.0;
  double v_phi = 0.0;
  double v_z = 0.0;
  /// Set when the emitter sits on the axis while moving transversally; the
  /// azimuthal velocity is then undefined and reported as zero.
  bool azimuthal_singular = false;
};

CylindricalKinematics kinematics_from_cartesian(const BeamGeometry &beam, const Vec3 &position,
                                                const Vec3 &velocity);

/// Full first-order Doppler shift in an LG beam (longitudinal, curvature,
/// Gouy, radial and azimuthal terms). Plane waves give -k v_z.
/// Throws SingularityError for r == 0 with non-zero v_phi.
double lg_doppler_shift(const BeamGeometry &beam, const CylindricalKinematics &kin);

/// Azimuthal contribution -(l/r) v_phi alone.
double azimuthal_shift(const BeamGeometry &beam, const CylindricalKinematics &kin);

/// delta_LG(beam1) - delta_LG(beam2): the shift seen by the two-photon D-D resonance.
double relative_two_beam_shift(const BeamGeometry &beam1, const BeamGeometry &beam2,
                               const CylindricalKinematics &kin1,
                               const CylindricalKinematics &kin2);

/// Plane-wave Doppler shift -k.v for a beam along the unit vector `direction`.
double plane_wave_shift(double wavelength, const Vec3 &direction, const Vec3 &velocity);

/// Peak-normalized intensity of a p = 0 LG mode at radius r and axial position z.
double lg_intensity(const BeamGeometry &beam, double r, double z = 0.0);

/// Radius of maximum intensity in the waist plane, w0 sqrt(|l|/2).
double lg_intensity_peak_radius(const BeamGeometry &beam);

/// Relative azimuthal sensitivity at equal local intensity, (I0/I)^(1/2|l|) 2l.
double sensitivity_scaling(int l, double intensity_ratio);

} // namespace rotdop
