#include "mmc/outputs.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mmc {
namespace {

// %.17g is the shortest format guaranteed to round-trip an IEEE double.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return is;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw std::runtime_error("bad number in csv: " + s);
  return v;
}

constexpr const char* kHistHeader =
    "iter,compliance,volume,vol_limit,t_tdf,t_fea,t_sen,t_mma,t_total";
constexpr const char* kComp2Header = "x0,y0,a,t1,t2,theta";
constexpr const char* kComp3Header = "x0,y0,z0,l1,l2,l3,alpha,beta,theta";

}  // namespace

void write_history_csv(const std::string& path,
                       const std::vector<IterRecord>& hist) {
  std::ofstream os = open_out(path);
  os << kHistHeader << "\n";
  for (const IterRecord& r : hist) {
    os << r.iter << ',' << fmt(r.compliance) << ',' << fmt(r.volume) << ','
       << fmt(r.vol_limit) << ',' << fmt(r.t_tdf) << ',' << fmt(r.t_fea)
       << ',' << fmt(r.t_sen) << ',' << fmt(r.t_mma) << ',' << fmt(r.t_total)
       << "\n";
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<IterRecord> read_history_csv(const std::string& path) {
  std::ifstream is = open_in(path);
  std::string line;
  if (!std::getline(is, line) || line != kHistHeader)
    throw std::runtime_error("unexpected history header in " + path);
  std::vector<IterRecord> hist;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> c = split_csv(line);
    if (c.size() != 9)
      throw std::runtime_error("bad history row in " + path + ": " + line);
    IterRecord r;
    r.iter = int(std::strtol(c[0].c_str(), nullptr, 10));
    r.compliance = to_double(c[1]);
    r.volume = to_double(c[2]);
    r.vol_limit = to_double(c[3]);
    r.t_tdf = to_double(c[4]);
    r.t_fea = to_double(c[5]);
    r.t_sen = to_double(c[6]);
    r.t_mma = to_double(c[7]);
    r.t_total = to_double(c[8]);
    hist.push_back(r);
  }
  return hist;
}

void write_components_csv(const std::string& path,
                          const Eigen::VectorXd& design, int dim) {
  const int cols = dim == 3 ? kVarsPerComponent3 : kVarsPerComponent2;
  if (design.size() % cols != 0)
    throw std::invalid_argument("design length not a multiple of " +
                                std::to_string(cols));
  std::ofstream os = open_out(path);
  os << (dim == 3 ? kComp3Header : kComp2Header) << "\n";
  const long n = design.size() / cols;
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < cols; ++j)
      os << (j ? "," : "") << fmt(design[i * cols + j]);
    os << "\n";
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

Eigen::VectorXd read_components_csv(const std::string& path, int* dim_out) {
  std::ifstream is = open_in(path);
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("empty components file " + path);
  int dim, cols;
  if (line == kComp2Header) {
    dim = 2;
    cols = kVarsPerComponent2;
  } else if (line == kComp3Header) {
    dim = 3;
    cols = kVarsPerComponent3;
  } else {
    throw std::runtime_error("unexpected components header in " + path);
  }
  std::vector<double> vals;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> c = split_csv(line);
    if (int(c.size()) != cols)
      throw std::runtime_error("bad components row in " + path + ": " + line);
    for (const std::string& s : c) vals.push_back(to_double(s));
  }
  if (dim_out) *dim_out = dim;
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), long(vals.size()));
}

void write_field_pgm(const std::string& path, const BackgroundGrid& grid,
                     const TdfField& field) {
  if (grid.dim != 2)
    throw std::invalid_argument("pgm writer handles 2D grids only");
  std::ofstream os = open_out(path, /*binary=*/true);
  const int w = grid.nodes_x(), h = grid.nodes_y();
  os << "P5\n" << w << " " << h << "\n255\n";
  const double lo = field.alpha_min;
  std::vector<unsigned char> row(static_cast<size_t>(w));
  for (int j = h - 1; j >= 0; --j) {
    for (int i = 0; i < w; ++i) {
      const double v = (field.h_at(grid.node_id(i, j)) - lo) / (1.0 - lo);
      const double c = v < 0 ? 0 : (v > 1 ? 1 : v);
      row[size_t(i)] = (unsigned char)(c * 255.0 + 0.5);
    }
    os.write(reinterpret_cast<const char*>(row.data()), w);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

void write_field_vtk(const std::string& path, const BackgroundGrid& grid,
                     const TdfField& field) {
  std::ofstream os = open_out(path);
  os << "# vtk DataFile Version 3.0\n"
     << "nodal density field\n"
     << "ASCII\n"
     << "DATASET STRUCTURED_POINTS\n"
     << "DIMENSIONS " << grid.nodes_x() << " " << grid.nodes_y() << " "
     << grid.nodes_z() << "\n"
     << "ORIGIN 0 0 0\n"
     << "SPACING " << fmt(grid.dx) << " " << fmt(grid.dy) << " "
     << fmt(grid.dim == 3 ? grid.dz : 1.0) << "\n"
     << "POINT_DATA " << grid.node_count() << "\n"
     << "SCALARS h double 1\n"
     << "LOOKUP_TABLE default\n";
  // Node ids are already x-fastest, the order VTK expects.
  for (long n = 0; n < grid.node_count(); ++n) {
    os << fmt(field.h_at(n));
    os << ((n % 6 == 5) ? '\n' : ' ');
  }
  if (grid.node_count() % 6 != 0) os << "\n";
  if (!os) throw std::runtime_error("write failed: " + path);
}

void write_summary_json(const std::string& path, const ProblemDef& def,
                        const RunParams& params, const RunResult& result) {
  nlohmann::json j;
  j["problem"] = def.name;
  j["dim"] = result.dim;
  j["background_cells"] = {def.nx, def.ny, def.nz};
  j["analysis_ratio"] = def.n_be;
  j["volume_fraction"] = def.vol_frac;
  j["max_iters"] = params.max_iters;
  j["converged"] = result.converged;
  j["iterations"] = result.iterations;
  j["compliance"] = result.c_obj;
  j["volume"] = result.v_final;
  j["components"] = result.design.size() /
                    (result.dim == 3 ? kVarsPerComponent3 : kVarsPerComponent2);
  if (result.has_post) {
    j["compliance_fine"] = result.c_post;
    j["rel_error"] = result.rel_error;
  }
  j["seconds"] = result.seconds;
  std::ofstream os = open_out(path);
  os << j.dump(2) << "\n";
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace mmc
