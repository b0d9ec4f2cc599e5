#include "lichlab/grid.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace lichlab {

BallGrid::BallGrid(double R, double h) : R_(R), h_(h) {
  if (!(h > 0.0) || !(R >= 4.0 * h)) throw InvalidGrid("need R >= 4h > 0");
  const int n = (int)std::floor(R / h);
  const double R2 = R * R;
  auto inside = [&](int i, int j, int k) {
    const double x = i * h, y = j * h, z = k * h;
    return x * x + y * y + z * z < R2;
  };
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      for (int k = -n; k <= n; ++k) {
        if (!inside(i, j, k)) continue;
        index_.emplace(pack(i, j, k), (int)nodes_.size());
        nodes_.push_back({i * h, j * h, k * h});
        lat_.push_back({i, j, k});
      }

  const std::size_t N = nodes_.size();
  nbr_.assign(6 * N, -1);
  interior_.assign(N, 1);
  full_stencil_.assign(N, 1);
  normal_.assign(N, Vec3{0, 0, 0});
  sweight_.assign(N, 0.0);
  for (std::size_t a = 0; a < N; ++a) {
    const auto& l = lat_[a];
    Vec3 face_sum{0, 0, 0};
    for (int d = 0; d < 3; ++d)
      for (int s = 0; s < 2; ++s) {
        int off[3] = {0, 0, 0};
        off[d] = s == 0 ? 1 : -1;
        const int id = find_lattice(l[0] + off[0], l[1] + off[1], l[2] + off[2]);
        nbr_[6 * a + 2 * d + s] = id;
        if (id < 0) {
          interior_[a] = 0;
          face_sum[d] += off[d];
        }
      }
    // diagonal support for the compact mixed stencils
    for (int d1 = 0; d1 < 3 && full_stencil_[a]; ++d1)
      for (int d2 = d1 + 1; d2 < 3 && full_stencil_[a]; ++d2)
        for (int s1 = -1; s1 <= 1; s1 += 2)
          for (int s2 = -1; s2 <= 1; s2 += 2) {
            int off[3] = {0, 0, 0};
            off[d1] = s1;
            off[d2] = s2;
            if (find_lattice(l[0] + off[0], l[1] + off[1], l[2] + off[2]) < 0) {
              full_stencil_[a] = 0;
            }
          }
    if (!interior_[a]) {
      full_stencil_[a] = 0;
      const double r = norm(nodes_[a]);
      Vec3 nu = r > 0 ? (1.0 / r) * nodes_[a] : Vec3{1, 0, 0};
      normal_[a] = nu;
      // each exposed face of area h^2 projected on the true normal
      sweight_[a] = h * h * dot(face_sum, nu);
      if (sweight_[a] < 0) sweight_[a] = 0;
      bnodes_.push_back(a);
    }
  }
}

int BallGrid::find_lattice(int i, int j, int k) const {
  auto it = index_.find(pack(i, j, k));
  return it == index_.end() ? -1 : it->second;
}

int BallGrid::locate(const Vec3& x) const {
  return find_lattice((int)std::lround(x[0] / h_), (int)std::lround(x[1] / h_), (int)std::lround(x[2] / h_));
}

GridPtr make_ball_grid(double R, double h) { return std::make_shared<BallGrid>(R, h); }

namespace {
void check_finite(double x) {
  if (!std::isfinite(x)) throw NonFiniteSample("sampled value is not finite");
}
}  // namespace

ScalarField sample_scalar(const GridPtr& g, const std::function<double(const Vec3&)>& fn) {
  ScalarField f(g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    f.v[i] = fn(g->node(i));
    check_finite(f.v[i]);
  }
  return f;
}

OneFormField sample_one_form(const GridPtr& g, const std::function<Vec3(const Vec3&)>& fn) {
  OneFormField f(g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const Vec3 w = fn(g->node(i));
    for (int c = 0; c < 3; ++c) {
      check_finite(w[c]);
      f.v[3 * i + c] = w[c];
    }
  }
  return f;
}

SymTensorField sample_sym_tensor(const GridPtr& g, const std::function<Sym3(const Vec3&)>& fn) {
  SymTensorField f(g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const Sym3 s = fn(g->node(i));
    for (int c = 0; c < 6; ++c) {
      check_finite(s.c[c]);
      f.v[6 * i + c] = s.c[c];
    }
  }
  return f;
}

template <int A>
double field_norm(const Field<A>& f, NormOrder order) {
  const BallGrid& g = *f.grid;
  const std::size_t N = g.size();
  const double h = g.spacing();

  double m0 = det_max(N, [&](std::size_t i) {
    double m = 0;
    for (int c = 0; c < A; ++c) m = std::max(m, std::abs(f.v[A * i + c]));
    return m;
  });
  if (order == NormOrder::C0) return m0;

  double m1 = det_max(N, [&](std::size_t i) -> double {
    if (!g.is_interior(i)) return 0.0;
    double s = 0;
    for (int c = 0; c < A; ++c)
      for (int d = 0; d < 3; ++d) {
        const int ip = g.neighbor(i, d, +1), im = g.neighbor(i, d, -1);
        const double dv = (f.v[A * ip + c] - f.v[A * im + c]) / (2 * h);
        s += dv * dv;
      }
    return std::sqrt(s);
  });
  if (order == NormOrder::C1) return m0 + m1;

  double m2 = det_max(N, [&](std::size_t i) -> double {
    if (!g.is_interior(i)) return 0.0;
    double m = 0;
    for (int c = 0; c < A; ++c) {
      for (int d = 0; d < 3; ++d) {
        const int ip = g.neighbor(i, d, +1), im = g.neighbor(i, d, -1);
        m = std::max(m, std::abs((f.v[A * ip + c] - 2 * f.v[A * i + c] + f.v[A * im + c]) / (h * h)));
      }
      if (g.has_full_stencil(i)) {
        for (int d1 = 0; d1 < 3; ++d1)
          for (int d2 = d1 + 1; d2 < 3; ++d2) {
            int o[3];
            auto id = [&](int s1, int s2) {
              o[0] = o[1] = o[2] = 0;
              o[d1] = s1;
              o[d2] = s2;
              return g.offset(i, o[0], o[1], o[2]);
            };
            const double dv = (f.v[A * id(1, 1) + c] - f.v[A * id(1, -1) + c] - f.v[A * id(-1, 1) + c] +
                               f.v[A * id(-1, -1) + c]) /
                              (4 * h * h);
            m = std::max(m, std::abs(dv));
          }
      }
    }
    return m;
  });
  return m0 + m1 + m2;
}

template double field_norm<1>(const Field<1>&, NormOrder);
template double field_norm<3>(const Field<3>&, NormOrder);
template double field_norm<6>(const Field<6>&, NormOrder);

template <int A>
void dump_field(const Field<A>& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.write("ELFG", 4);
  const uint32_t version = 1;
  const uint64_t count = f.size();
  const uint8_t arity = A;
  const double R = f.grid->radius(), h = f.grid->spacing();
  os.write(reinterpret_cast<const char*>(&version), 4);
  os.write(reinterpret_cast<const char*>(&count), 8);
  os.write(reinterpret_cast<const char*>(&arity), 1);
  os.write(reinterpret_cast<const char*>(&R), 8);
  os.write(reinterpret_cast<const char*>(&h), 8);
  os.write(reinterpret_cast<const char*>(f.v.data()), (std::streamsize)(f.v.size() * 8));
}

std::array<double, 4> peek_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[4];
  uint32_t version;
  uint64_t count;
  uint8_t arity;
  double R, h;
  is.read(magic, 4);
  is.read(reinterpret_cast<char*>(&version), 4);
  is.read(reinterpret_cast<char*>(&count), 8);
  is.read(reinterpret_cast<char*>(&arity), 1);
  is.read(reinterpret_cast<char*>(&R), 8);
  is.read(reinterpret_cast<char*>(&h), 8);
  if (!is || std::memcmp(magic, "ELFG", 4) != 0 || version != 1)
    throw std::runtime_error("bad field file " + path);
  return {(double)arity, (double)count, R, h};
}

template <int A>
Field<A> load_field(const std::string& path, int expected_arity) {
  auto hdr = peek_field(path);
  if ((int)hdr[0] != expected_arity) throw std::runtime_error("arity mismatch in " + path);
  std::ifstream is(path, std::ios::binary);
  is.seekg(4 + 4 + 8 + 1 + 8 + 8);
  Field<A> f(make_ball_grid(hdr[2], hdr[3]));
  if (f.size() != (std::size_t)hdr[1]) throw std::runtime_error("node count mismatch in " + path);
  is.read(reinterpret_cast<char*>(f.v.data()), (std::streamsize)(f.v.size() * 8));
  if (!is) throw std::runtime_error("truncated field file " + path);
  return f;
}

template <int A>
void export_csv(const Field<A>& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "x,y,z";
  for (int c = 0; c < A; ++c) os << ",v" << c;
  os << "\n";
  char buf[96];
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Vec3& p = f.grid->node(i);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", p[0], p[1], p[2]);
    os << buf;
    for (int c = 0; c < A; ++c) {
      std::snprintf(buf, sizeof buf, ",%.17g", f.v[A * i + c]);
      os << buf;
    }
    os << "\n";
  }
}

template void dump_field<1>(const Field<1>&, const std::string&);
template void dump_field<3>(const Field<3>&, const std::string&);
template void dump_field<6>(const Field<6>&, const std::string&);
template Field<1> load_field<1>(const std::string&, int);
template Field<3> load_field<3>(const std::string&, int);
template Field<6> load_field<6>(const std::string&, int);
template void export_csv<1>(const Field<1>&, const std::string&);
template void export_csv<3>(const Field<3>&, const std::string&);
template void export_csv<6>(const Field<6>&, const std::string&);

}  // namespace lichlab
