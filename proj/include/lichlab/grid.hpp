#pragma once

#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "lichlab/core.hpp"

namespace lichlab {

/// Regular lattice restricted to the open Euclidean ball B_0(R).
///
/// Nodes are the lattice points h*(i,j,k) with |x| < R, ordered
/// lexicographically by (i,j,k). Interior nodes have all 6 axis neighbors
/// inside the ball; the rest are boundary nodes and carry the exact normal
/// x/|x| plus a flux-consistent staircase surface weight.
class BallGrid {
 public:
  BallGrid(double R, double h);

  double radius() const { return R_; }
  double spacing() const { return h_; }
  std::size_t size() const { return nodes_.size(); }
  double cell_volume() const { return h_ * h_ * h_; }

  const std::vector<Vec3>& nodes() const { return nodes_; }
  const Vec3& node(std::size_t i) const { return nodes_[i]; }
  const std::array<int, 3>& lattice(std::size_t i) const { return lat_[i]; }

  bool is_interior(std::size_t i) const { return interior_[i] != 0; }
  bool is_boundary(std::size_t i) const { return interior_[i] == 0; }
  const std::vector<uint8_t>& interior_mask() const { return interior_; }

  /// Node id of the axis neighbor (d in 0..2, s = +1/-1), or -1.
  int neighbor(std::size_t i, int d, int s) const { return nbr_[6 * i + 2 * d + (s > 0 ? 0 : 1)]; }

  /// Node id at lattice offset (di,dj,dk) from node i, or -1.
  int offset(std::size_t i, int di, int dj, int dk) const {
    return find_lattice(lat_[i][0] + di, lat_[i][1] + dj, lat_[i][2] + dk);
  }
  int find_lattice(int i, int j, int k) const;
  /// Node id whose cell contains x (nearest lattice point), or -1.
  int locate(const Vec3& x) const;

  /// Unit outward normal x/|x| (zero vector for interior nodes).
  const Vec3& boundary_normal(std::size_t i) const { return normal_[i]; }
  /// Staircase face area projected on the true normal; zero for interior.
  double surface_weight(std::size_t i) const { return sweight_[i]; }
  const std::vector<std::size_t>& boundary_nodes() const { return bnodes_; }

  /// True if the full compact second-order stencil (6 axis + 12 diagonal
  /// neighbors) exists at node i.
  bool has_full_stencil(std::size_t i) const { return full_stencil_[i] != 0; }

 private:
  double R_, h_;
  std::vector<Vec3> nodes_;
  std::vector<std::array<int, 3>> lat_;
  std::vector<int> nbr_;
  std::vector<uint8_t> interior_, full_stencil_;
  std::vector<Vec3> normal_;
  std::vector<double> sweight_;
  std::vector<std::size_t> bnodes_;
  std::unordered_map<int64_t, int> index_;

  static int64_t pack(int i, int j, int k) {
    return ((int64_t)(i + (1 << 20)) << 42) | ((int64_t)(j + (1 << 20)) << 21) | (int64_t)(k + (1 << 20));
  }
};

using GridPtr = std::shared_ptr<const BallGrid>;

GridPtr make_ball_grid(double R, double h);

/// Discrete field with `arity` reals per node (1 scalar / 3 one-form /
/// 6 symmetric tensor), node-major layout.
template <int Arity>
struct Field {
  GridPtr grid;
  std::vector<double> v;

  Field() = default;
  explicit Field(GridPtr g, double fill = 0.0) : grid(std::move(g)), v(grid->size() * Arity, fill) {}

  static constexpr int arity = Arity;
  std::size_t size() const { return grid ? grid->size() : 0; }
  double* at(std::size_t i) { return v.data() + Arity * i; }
  const double* at(std::size_t i) const { return v.data() + Arity * i; }
};

struct ScalarField : Field<1> {
  using Field<1>::Field;
  ScalarField() = default;
  explicit ScalarField(Field<1>&& f) : Field<1>(std::move(f)) {}
  double operator()(std::size_t i) const { return v[i]; }
  double& operator()(std::size_t i) { return v[i]; }
};

struct OneFormField : Field<3> {
  using Field<3>::Field;
  OneFormField() = default;
  explicit OneFormField(Field<3>&& f) : Field<3>(std::move(f)) {}
  Vec3 vec(std::size_t i) const { return {v[3 * i], v[3 * i + 1], v[3 * i + 2]}; }
  void set(std::size_t i, const Vec3& w) {
    v[3 * i] = w[0]; v[3 * i + 1] = w[1]; v[3 * i + 2] = w[2];
  }
};

struct SymTensorField : Field<6> {
  using Field<6>::Field;
  SymTensorField() = default;
  explicit SymTensorField(Field<6>&& f) : Field<6>(std::move(f)) {}
  bool traceless_flag = false;
  Sym3 sym(std::size_t i) const {
    Sym3 s;
    for (int k = 0; k < 6; ++k) s.c[k] = v[6 * i + k];
    return s;
  }
  void set(std::size_t i, const Sym3& s) {
    for (int k = 0; k < 6; ++k) v[6 * i + k] = s.c[k];
  }
};

ScalarField sample_scalar(const GridPtr& g, const std::function<double(const Vec3&)>& fn);
OneFormField sample_one_form(const GridPtr& g, const std::function<Vec3(const Vec3&)>& fn);
SymTensorField sample_sym_tensor(const GridPtr& g, const std::function<Sym3(const Vec3&)>& fn);

enum class NormOrder { C0, C1, C2 };

/// Discrete sup-norm surrogates of the C^k norms: C0 adds the max value,
/// C1 the max centered-difference gradient magnitude over interior nodes,
/// C2 the max centered second-difference Hessian entry.
template <int A>
double field_norm(const Field<A>& f, NormOrder order);

extern template double field_norm<1>(const Field<1>&, NormOrder);
extern template double field_norm<3>(const Field<3>&, NormOrder);
extern template double field_norm<6>(const Field<6>&, NormOrder);

// Binary dump format: "ELFG", u32 version=1, u64 node count, u8 arity,
// f64 R, f64 h, then arity*count f64 values in node order (little-endian).
template <int A>
void dump_field(const Field<A>& f, const std::string& path);
template <int A>
Field<A> load_field(const std::string& path, int expected_arity = A);
template <int A>
void export_csv(const Field<A>& f, const std::string& path);

/// Reads the header of a field dump and returns (arity, count, R, h).
std::array<double, 4> peek_field(const std::string& path);

}  // namespace lichlab
