#pragma once

// Paired-landmark rigid registration: least-squares rotation + translation
// from the SVD of the landmark cross-covariance, with reflection correction.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "vict/errors.hpp"
#include "vict/fcsv.hpp"
#include "vict/mesh.hpp"
#include "vict/volgrid.hpp"

namespace vict {

/// Maps p to rotation * p + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 operator()(const Vec3& p) const { return rotation * p + translation; }

  RigidTransform inverse() const {
    const Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

/// compose(a, b)(p) == a(b(p))
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline void validate(const RigidTransform& t, double tol = kOrthonormalTol) {
  if (!t.rotation.allFinite() || !t.translation.allFinite())
    throw RegistrationError("transform is not finite");
  if ((t.rotation.transpose() * t.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > tol ||
      std::abs(t.rotation.determinant() - 1.0) > tol)
    throw RegistrationError("rotation is not a proper orthonormal matrix");
}

inline RigidTransform from_matrix(const Eigen::Matrix4d& m) {
  const Eigen::RowVector4d last = m.row(3);
  if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-12)
    throw RegistrationError("bottom row of a rigid 4x4 matrix must be 0 0 0 1");
  RigidTransform t{m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
  validate(t);
  return t;
}

inline std::vector<Vec3> apply_transform(const RigidTransform& t, const std::vector<Vec3>& pts) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(t(p));
  return out;
}

inline TriMesh apply_transform(const RigidTransform& t, const TriMesh& mesh) {
  return {apply_transform(t, mesh.vertices), mesh.triangles};
}

inline FiducialSet apply_transform(const RigidTransform& t, const FiducialSet& f) {
  FiducialSet out = f;
  for (auto& p : out.points) p.position = t(p.position);
  return out;
}

/// Rotation angle of a relative rotation, robust near zero.
inline double rotation_angle(const Mat3& r) {
  return Eigen::AngleAxisd(Eigen::Quaterniond(r).normalized()).angle();
}

struct LandmarkPair {
  std::string label;
  Vec3 source;
  Vec3 target;
};

struct LandmarkPairs {
  std::vector<LandmarkPair> pairs;
};

inline constexpr double kCollinearTol = 1e-9;

/// Throws RegistrationError when there are fewer than 3 pairs or the source
/// points are (numerically) collinear.
inline void validate(const LandmarkPairs& lp) {
  if (lp.pairs.size() < 3)
    throw RegistrationError("rigid registration needs at least 3 landmark pairs, got " +
                            std::to_string(lp.pairs.size()));
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : lp.pairs) centroid += p.source;
  centroid /= static_cast<double>(lp.pairs.size());
  Eigen::MatrixXd centered(lp.pairs.size(), 3);
  for (std::size_t k = 0; k < lp.pairs.size(); ++k)
    centered.row(static_cast<Eigen::Index>(k)) = (lp.pairs[k].source - centroid).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  if (!(svd.singularValues()[1] > kCollinearTol))
    throw RegistrationError("degenerate landmark configuration: source points are collinear");
}

struct PairingResult {
  LandmarkPairs pairs;
  std::vector<std::string> unmatched;  // labels present in only one set
};

/// Pairs landmarks by label. Both sets are converted to LPS first.
inline PairingResult pair_by_label(const FiducialSet& source, const FiducialSet& target) {
  const FiducialSet src = to_lps(source);
  const FiducialSet dst = to_lps(target);
  PairingResult out;
  for (const auto& s : src.points) {
    if (const auto* d = dst.find(s.label)) out.pairs.pairs.push_back({s.label, s.position, d->position});
    else out.unmatched.push_back(s.label);
  }
  for (const auto& d : dst.points)
    if (!src.find(d.label)) out.unmatched.push_back(d.label);
  return out;
}

/// RMS of |t(source) - target| over the pairs.
inline double fre_against(const RigidTransform& t, const LandmarkPairs& lp) {
  if (lp.pairs.empty()) throw RegistrationError("FRE of an empty landmark set is undefined");
  double sum = 0.0;
  for (const auto& p : lp.pairs) sum += (t(p.source) - p.target).squaredNorm();
  return std::sqrt(sum / static_cast<double>(lp.pairs.size()));
}

struct RigidFit {
  RigidTransform transform;
  double fre = 0.0;
};

inline RigidFit fit_rigid(const LandmarkPairs& lp) {
  validate(lp);
  const double n = static_cast<double>(lp.pairs.size());
  Vec3 cs = Vec3::Zero(), cg = Vec3::Zero();
  for (const auto& p : lp.pairs) {
    cs += p.source;
    cg += p.target;
  }
  cs /= n;
  cg /= n;

  Mat3 cov = Mat3::Zero();
  for (const auto& p : lp.pairs) cov += (p.source - cs) * (p.target - cg).transpose();

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

  RigidFit out;
  out.transform.rotation = v * fix * u.transpose();
  out.transform.translation = cg - out.transform.rotation * cs;
  out.fre = fre_against(out.transform, lp);
  return out;
}

} // namespace vict
