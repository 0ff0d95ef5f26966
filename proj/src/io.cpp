#include "voxgp/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace voxgp {

namespace {

void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

}  // namespace

float canonical_nan() {
  return std::bit_cast<float>(std::uint32_t{0x7fc00000u});
}

VolumeFileData read_volume_file(const std::filesystem::path& path,
                                const char expected_magic[4]) {
  const std::vector<std::uint8_t> bytes = read_all(path);
  if (bytes.size() < 20) throw FormatError("file too short for header", bytes.size());
  for (std::size_t i = 0; i < 4; ++i)
    if (static_cast<char>(bytes[i]) != expected_magic[i])
      throw FormatError("bad magic", i);

  VolumeFileData data;
  std::memcpy(data.magic.data(), bytes.data(), 4);
  data.nx = get_u32le(bytes.data() + 4);
  data.ny = get_u32le(bytes.data() + 8);
  data.nz = get_u32le(bytes.data() + 12);
  data.count = get_u32le(bytes.data() + 16);
  if (data.nx == 0 || data.ny == 0 || data.nz == 0)
    throw FormatError("zero dimension", 4);

  const std::uint64_t nvox =
      static_cast<std::uint64_t>(data.nx) * data.ny * data.nz;
  const std::uint64_t expected = 20 + nvox * (1 + 4ull * data.count);
  if (bytes.size() != expected)
    throw FormatError("file length does not match header",
                      std::min<std::uint64_t>(bytes.size(), expected));

  data.mask.assign(bytes.begin() + 20, bytes.begin() + 20 + static_cast<std::ptrdiff_t>(nvox));
  for (std::size_t i = 0; i < nvox; ++i)
    if (data.mask[i] > 1) throw FormatError("mask byte not 0/1", 20 + i);

  const std::uint8_t* p = bytes.data() + 20 + nvox;
  data.volumes.resize(data.count);
  for (auto& vol : data.volumes) {
    vol.resize(nvox);
    for (std::size_t i = 0; i < nvox; ++i, p += 4) {
      float f = std::bit_cast<float>(get_u32le(p));
      if (std::isnan(f)) f = canonical_nan();  // normalize NaN payloads
      vol[i] = f;
    }
  }
  return data;
}

void write_volume_file(const std::filesystem::path& path, const char magic[4],
                       const Lattice& lattice,
                       const std::vector<std::vector<float>>& volumes) {
  const std::size_t nvox = lattice.n_total();
  std::string bytes;
  bytes.reserve(20 + nvox * (1 + 4 * volumes.size()));
  bytes.append(magic, 4);
  put_u32le(bytes, static_cast<std::uint32_t>(lattice.nx()));
  put_u32le(bytes, static_cast<std::uint32_t>(lattice.ny()));
  put_u32le(bytes, static_cast<std::uint32_t>(lattice.nz()));
  put_u32le(bytes, static_cast<std::uint32_t>(volumes.size()));
  bytes.append(reinterpret_cast<const char*>(lattice.mask().data()), nvox);
  for (const auto& vol : volumes) {
    if (vol.size() != nvox) throw ValidationError("write_volume_file: volume size mismatch");
    for (std::size_t i = 0; i < nvox; ++i) {
      float f = vol[i];
      if (!lattice.in_mask(i) || std::isnan(f)) f = canonical_nan();
      put_u32le(bytes, std::bit_cast<std::uint32_t>(f));
    }
  }
  atomic_write(path, bytes);
}

void write_gpv1(const std::filesystem::path& path, const Lattice& lattice,
                const std::vector<std::vector<float>>& volumes) {
  write_volume_file(path, kMagicGpv1, lattice, volumes);
}

VolumeFileData read_gpv1(const std::filesystem::path& path) {
  return read_volume_file(path, kMagicGpv1);
}

Lattice lattice_from_file(const VolumeFileData& data) {
  return Lattice(static_cast<int>(data.nx), static_cast<int>(data.ny),
                 static_cast<int>(data.nz), data.mask);
}

void write_gph1(const std::filesystem::path& path, const HyperField& field) {
  const Lattice& lat = field.lattice();
  std::vector<std::vector<float>> comps(
      3, std::vector<float>(lat.n_total(), canonical_nan()));
  for (std::size_t i = 0; i < lat.n_masked(); ++i) {
    const std::uint32_t v = lat.masked_ids()[i];
    const Eigen::Vector3d l = field.values()[i].as_vector();
    for (int c = 0; c < 3; ++c) comps[static_cast<std::size_t>(c)][v] = static_cast<float>(l[c]);
  }
  write_volume_file(path, kMagicGph1, lat, comps);
}

HyperField read_gph1(const std::filesystem::path& path) {
  const VolumeFileData data = read_volume_file(path, kMagicGph1);
  if (data.count != 3) throw FormatError("GPH1 expects p=3 components", 16);
  HyperField field(lattice_from_file(data));
  const Lattice& lat = field.lattice();
  for (std::size_t i = 0; i < lat.n_masked(); ++i) {
    const std::uint32_t v = lat.masked_ids()[i];
    const Eigen::Vector3d l{static_cast<double>(data.volumes[0][v]),
                            static_cast<double>(data.volumes[1][v]),
                            static_cast<double>(data.volumes[2][v])};
    if (!l.allFinite()) throw FormatError("non-finite masked-in field value", 0);
    field.values()[i] = HyperParams::from_vector(l);
  }
  return field;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_scores_csv(const std::filesystem::path& path,
                      const std::vector<double>& scores) {
  std::string text = "subject,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i)
    text += std::to_string(i) + "," + format_double(scores[i]) + "\n";
  atomic_write(path, text);
}

std::vector<double> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("scores CSV: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "subject,score")
    throw ValidationError("scores CSV: expected header 'subject,score'");
  std::vector<double> scores;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw ValidationError("scores CSV: missing comma in row");
    double v = 0.0;
    const char* begin = line.data() + comma + 1;
    const char* end = line.data() + line.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end || !std::isfinite(v))
      throw ValidationError("scores CSV: bad score value");
    scores.push_back(v);
  }
  return scores;
}

CarConfig RunConfig::car_config() const {
  CarConfig cfg;
  cfg.rho = rho;
  cfg.t = t;
  cfg.coupling = coupling;
  cfg.sweeps = sweeps;
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

VolumeFitOptions RunConfig::fit_options() const {
  VolumeFitOptions opts;
  opts.mean_value = mean;
  opts.optimizer.max_iter = opt_max_iter;
  opts.optimizer.grad_tol = opt_tol;
  opts.optimizer.jitter = jitter;
  return opts;
}

namespace {

double parse_double_value(const std::string& key, std::string_view sv) {
  double v = 0.0;
  const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), v);
  if (res.ec != std::errc{} || res.ptr != sv.data() + sv.size())
    throw ValidationError("config: bad numeric value for " + key);
  return v;
}

std::uint64_t parse_u64_value(const std::string& key, std::string_view sv) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), v);
  if (res.ec != std::errc{} || res.ptr != sv.data() + sv.size())
    throw ValidationError("config: bad integer value for " + key);
  return v;
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // trim leading spaces
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    const std::size_t eq = line.find('=', start);
    if (eq == std::string::npos) throw ValidationError("config: expected key=value: " + line);
    std::string key = line.substr(start, eq - start);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::string value = line.substr(eq + 1);
    const std::size_t vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? "" : value.substr(vstart);
    while (!value.empty() && (value.back() == ' ' || value.back() == '\t')) value.pop_back();

    if (key == "kernel") {
      if (value == "se") cfg.kernel = KernelKind::SquaredExponential;
      else if (value == "linear") cfg.kernel = KernelKind::Linear;
      else throw ValidationError("config: kernel must be se or linear");
    } else if (key == "rho1") cfg.rho[0] = parse_double_value(key, value);
    else if (key == "rho2") cfg.rho[1] = parse_double_value(key, value);
    else if (key == "rho3") cfg.rho[2] = parse_double_value(key, value);
    else if (key == "t1") cfg.t[0] = parse_double_value(key, value);
    else if (key == "t2") cfg.t[1] = parse_double_value(key, value);
    else if (key == "t3") cfg.t[2] = parse_double_value(key, value);
    else if (key == "sweeps") cfg.sweeps = static_cast<int>(parse_u64_value(key, value));
    else if (key == "seed") cfg.seed = parse_u64_value(key, value);
    else if (key == "jitter") cfg.jitter = parse_double_value(key, value);
    else if (key == "coupling") {
      if (value == "diagonal") cfg.coupling = CouplingMode::Diagonal;
      else if (value == "fullrow") cfg.coupling = CouplingMode::FullRowConstant;
      else throw ValidationError("config: coupling must be diagonal or fullrow");
    } else if (key == "mean") cfg.mean = parse_double_value(key, value);
    else if (key == "opt_max_iter")
      cfg.opt_max_iter = static_cast<int>(parse_u64_value(key, value));
    else if (key == "opt_tol") cfg.opt_tol = parse_double_value(key, value);
    else if (key == "score_min") cfg.score_min = parse_double_value(key, value);
    else if (key == "score_max") cfg.score_max = parse_double_value(key, value);
    else throw ValidationError("config: unknown key: " + key);
  }
  return cfg;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str());
}

}  // namespace voxgp
