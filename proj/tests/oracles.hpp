#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. Nothing here calls into the library's transform or
// kinematics code.

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

using Mat4 = Eigen::Matrix4d;

inline Mat4 translation(double x, double y, double z) {
  Mat4 m = Mat4::Identity();
  m(0, 3) = x;
  m(1, 3) = y;
  m(2, 3) = z;
  return m;
}

// URDF convention: R = Rz(yaw) Ry(pitch) Rx(roll)
inline Mat4 rpy(double r, double p, double y) {
  Mat4 rx = Mat4::Identity(), ry = Mat4::Identity(), rz = Mat4::Identity();
  rx(1, 1) = std::cos(r), rx(1, 2) = -std::sin(r), rx(2, 1) = std::sin(r), rx(2, 2) = std::cos(r);
  ry(0, 0) = std::cos(p), ry(0, 2) = std::sin(p), ry(2, 0) = -std::sin(p), ry(2, 2) = std::cos(p);
  rz(0, 0) = std::cos(y), rz(0, 1) = -std::sin(y), rz(1, 0) = std::sin(y), rz(1, 1) = std::cos(y);
  return rz * ry * rx;
}

// Rodrigues, written out element by element
inline Mat4 axis_angle(double ax, double ay, double az, double t) {
  const double n = std::sqrt(ax * ax + ay * ay + az * az);
  ax /= n, ay /= n, az /= n;
  const double c = std::cos(t), s = std::sin(t), v = 1 - c;
  Mat4 m = Mat4::Identity();
  m(0, 0) = c + ax * ax * v, m(0, 1) = ax * ay * v - az * s, m(0, 2) = ax * az * v + ay * s;
  m(1, 0) = ay * ax * v + az * s, m(1, 1) = c + ay * ay * v, m(1, 2) = ay * az * v - ax * s;
  m(2, 0) = az * ax * v - ay * s, m(2, 1) = az * ay * v + ax * s, m(2, 2) = c + az * az * v;
  return m;
}

struct ChainJoint {
  std::string name;
  bool revolute = true;
  int parent = 0;  // link index
  int child = 0;
  double xyz[3];
  double rpy[3];
  double axis[3];
  double lower = -1.0, upper = 1.0;
};

struct Chain {
  int links = 1;
  std::vector<ChainJoint> joints;  // parents always precede children

  std::string urdf() const {
    std::ostringstream o;
    o.precision(17);
    o << "<?xml version=\"1.0\"?>\n<robot name=\"chain\">\n";
    for (int l = 0; l < links; ++l) o << "  <link name=\"l" << l << "\"/>\n";
    for (const auto& j : joints) {
      o << "  <joint name=\"" << j.name << "\" type=\"" << (j.revolute ? "revolute" : "fixed") << "\">"
        << "<parent link=\"l" << j.parent << "\"/><child link=\"l" << j.child << "\"/>"
        << "<origin xyz=\"" << j.xyz[0] << " " << j.xyz[1] << " " << j.xyz[2] << "\" rpy=\"" << j.rpy[0] << " "
        << j.rpy[1] << " " << j.rpy[2] << "\"/>";
      if (j.revolute) {
        o << "<axis xyz=\"" << j.axis[0] << " " << j.axis[1] << " " << j.axis[2] << "\"/><limit lower=\""
          << j.lower << "\" upper=\"" << j.upper << "\" effort=\"1\" velocity=\"1\"/>";
      }
      o << "</joint>\n";
    }
    o << "</robot>\n";
    return o.str();
  }

  // Naive homogeneous-matrix chain product per link.
  std::vector<Mat4> poses(const std::map<std::string, double>& angles, const Mat4& base) const {
    std::vector<Mat4> out(links, Mat4::Identity());
    out[0] = base;
    for (const auto& j : joints) {
      Mat4 m = out[j.parent] * translation(j.xyz[0], j.xyz[1], j.xyz[2]) * rpy(j.rpy[0], j.rpy[1], j.rpy[2]);
      if (j.revolute) m = m * axis_angle(j.axis[0], j.axis[1], j.axis[2], angles.at(j.name));
      out[j.child] = m;
    }
    return out;
  }
};

// Random tree with up to max_joints joints; serial when `serial`. Unit axes.
inline Chain random_chain(std::mt19937_64& rng, int max_joints, bool serial) {
  std::uniform_int_distribution<int> count(1, max_joints);
  std::uniform_real_distribution<double> pos(-0.05, 0.05), ang(-3.1, 3.1), unit(-1, 1);
  std::bernoulli_distribution fixed(0.15);
  Chain c;
  const int n = count(rng);
  c.links = n + 1;
  for (int i = 0; i < n; ++i) {
    ChainJoint j;
    j.name = "j" + std::to_string(i);
    j.revolute = !fixed(rng);
    j.child = i + 1;
    j.parent = serial ? i : std::uniform_int_distribution<int>(0, i)(rng);
    for (double& v : j.xyz) v = pos(rng);
    for (double& v : j.rpy) v = ang(rng);
    double a[3], norm = 0;
    do {
      norm = 0;
      for (double& v : a) v = unit(rng), norm += v * v;
    } while (norm < 0.05);
    for (int k = 0; k < 3; ++k) j.axis[k] = a[k] / std::sqrt(norm);
    j.lower = -3.0;
    j.upper = 3.0;
    c.joints.push_back(j);
  }
  return c;
}

// Exhaustive nearest point, lowest index on ties.
inline std::vector<int> brute_nearest(const std::vector<Eigen::Vector3d>& from, const std::vector<Eigen::Vector3d>& to) {
  std::vector<int> out;
  for (const auto& p : from) {
    int best = 0;
    double bd = (p - to[0]).squaredNorm();
    for (int k = 1; k < static_cast<int>(to.size()); ++k) {
      const double d = (p - to[k]).squaredNorm();
      if (d < bd) bd = d, best = k;
    }
    out.push_back(best);
  }
  return out;
}

// Zero-intercept normal equation m = sum(x y) / sum(x^2), long double.
inline double normal_equation_slope(const std::vector<double>& x, const std::vector<double>& y) {
  long double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += static_cast<long double>(x[i]) * y[i], sxx += static_cast<long double>(x[i]) * x[i];
  return static_cast<double>(sxy / sxx);
}

}  // namespace oracle
