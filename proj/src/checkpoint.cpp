#include "ttcontrol/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "ttcontrol/common.hpp"

namespace ttc {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64(std::ostream& out, const double* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(double)));
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw numeric_error(std::string("checkpoint truncated while reading ") + what);
  return v;
}

void get_f64(std::istream& in, double* data, std::size_t count, const char* what) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw numeric_error(std::string("checkpoint truncated while reading ") + what);
}

void expect_magic(std::istream& in, const char* magic) {
  char buf[4];
  in.read(buf, 4);
  if (!in || std::memcmp(buf, magic, 4) != 0) {
    throw numeric_error(std::string("checkpoint does not start with ") + magic);
  }
}

}  // namespace

void write_tensor(std::ostream& out, const TensorTrain& tt) {
  out.write("TT01", 4);
  const Eigen::Index d = tt.order();
  put_u32(out, static_cast<std::uint32_t>(d));
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    put_u32(out, static_cast<std::uint32_t>(tt.mode_size(mu)));
  }
  for (Eigen::Index mu = 0; mu <= d; ++mu) {
    put_u32(out, static_cast<std::uint32_t>(tt.rank(mu)));
  }
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    const Eigen::MatrixXd& core = tt.core(mu);
    put_f64(out, core.data(), static_cast<std::size_t>(core.size()));
  }
}

TensorTrain read_tensor(std::istream& in) {
  expect_magic(in, "TT01");
  const std::uint32_t d = get_u32(in, "tensor order");
  if (d == 0) throw numeric_error("checkpoint tensor has order zero");
  std::vector<Eigen::Index> modes(d);
  for (auto& m : modes) m = static_cast<Eigen::Index>(get_u32(in, "mode size"));
  std::vector<Eigen::Index> ranks(d + 1);
  for (auto& r : ranks) r = static_cast<Eigen::Index>(get_u32(in, "rank"));
  std::vector<Eigen::MatrixXd> cores(d);
  for (std::uint32_t mu = 0; mu < d; ++mu) {
    Eigen::MatrixXd core(ranks[mu] * modes[mu], ranks[mu + 1]);
    get_f64(in, core.data(), static_cast<std::size_t>(core.size()), "component");
    cores[mu] = std::move(core);
  }
  return TensorTrain::from_cores(modes, std::move(cores));
}

void write_path(std::ostream& out, const ValueFunctionPath& path) {
  if (path.times.size() != path.tensors.size()) {
    throw shape_error("path has " + std::to_string(path.times.size()) + " times but " +
                      std::to_string(path.tensors.size()) + " tensors");
  }
  out.write("VFP1", 4);
  put_u32(out, path.mode == InterpMode::linear ? 1u : 0u);
  put_u32(out, static_cast<std::uint32_t>(path.times.size()));
  put_f64(out, path.times.data(), path.times.size());
  for (const TensorTrain& tt : path.tensors) write_tensor(out, tt);
}

ValueFunctionPath read_path(std::istream& in) {
  expect_magic(in, "VFP1");
  const std::uint32_t mode = get_u32(in, "interpolation mode");
  if (mode > 1) {
    throw numeric_error("checkpoint has unknown interpolation mode " + std::to_string(mode));
  }
  const std::uint32_t count = get_u32(in, "node count");
  if (count == 0) throw numeric_error("checkpoint path has no nodes");
  ValueFunctionPath path;
  path.mode = mode == 1 ? InterpMode::linear : InterpMode::piecewise_constant;
  path.times.resize(count);
  get_f64(in, path.times.data(), count, "node times");
  for (std::uint32_t i = 1; i < count; ++i) {
    if (!(path.times[i] > path.times[i - 1])) {
      throw numeric_error("checkpoint node times are not strictly increasing");
    }
  }
  path.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) path.tensors.push_back(read_tensor(in));
  return path;
}

void save_path(const std::string& filename, const ValueFunctionPath& path) {
  std::ofstream out(filename, std::ios::binary);
  if (!out) throw numeric_error("cannot open " + filename + " for writing");
  write_path(out, path);
  out.flush();
  if (!out) throw numeric_error("failed writing checkpoint to " + filename);
}

ValueFunctionPath load_path(const std::string& filename) {
  std::ifstream in(filename, std::ios::binary);
  if (!in) throw numeric_error("cannot open " + filename);
  return read_path(in);
}

}  // namespace ttc
