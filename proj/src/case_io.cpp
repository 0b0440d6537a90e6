#include "promptrl/case_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace promptrl {
namespace fs = std::filesystem;
namespace {

struct PgmData {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint16_t> samples;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Reads a whitespace-separated header token, skipping '#' comments.
std::string next_token(const std::string& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
  return buf.substr(start, pos - start);
}

PgmData read_pgm(const fs::path& path) {
  const std::string buf = read_file(path);
  auto corrupt = [&](const std::string& why) {
    return Error(ErrorCode::CorruptCase, path.string() + ": " + why);
  };
  std::size_t pos = 0;
  if (next_token(buf, pos) != "P5") throw corrupt("not a binary PGM");
  PgmData pgm;
  try {
    pgm.width = std::stoi(next_token(buf, pos));
    pgm.height = std::stoi(next_token(buf, pos));
    pgm.maxval = std::stoi(next_token(buf, pos));
  } catch (const std::logic_error&) {
    throw corrupt("malformed header");
  }
  if (pgm.width <= 0 || pgm.height <= 0 || pgm.maxval <= 0 || pgm.maxval > 65535) {
    throw corrupt("invalid header values");
  }
  ++pos;  // single whitespace after maxval
  const std::size_t n = static_cast<std::size_t>(pgm.width) * pgm.height;
  const std::size_t bytes = pgm.maxval > 255 ? 2 : 1;
  if (buf.size() < pos + n * bytes) throw corrupt("truncated pixel data");
  pgm.samples.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
  for (std::size_t i = 0; i < n; ++i) {
    pgm.samples[i] = bytes == 2 ? static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1])
                                : p[i];
  }
  return pgm;
}

void write_file(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace

float quantize16(double v) {
  const double q = std::round(std::clamp(v, 0.0, 1.0) * 65535.0);
  return static_cast<float>(q / 65535.0);
}

void save_case(const fs::path& dir, const LabeledCase& c) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  const int w = c.image.width(), h = c.image.height();
  std::string img = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
  for (float v : c.image.values()) {
    const auto s = static_cast<std::uint16_t>(std::lround(std::clamp(double(v), 0.0, 1.0) * 65535.0));
    img.push_back(static_cast<char>(s >> 8));
    img.push_back(static_cast<char>(s & 0xff));
  }
  write_file(dir / "image.pgm", img);

  std::string mask = "P5\n" + std::to_string(c.truth.width()) + " " +
                     std::to_string(c.truth.height()) + "\n255\n";
  for (std::uint8_t v : c.truth.values()) mask.push_back(static_cast<char>(v ? 255 : 0));
  write_file(dir / "mask.pgm", mask);

  nlohmann::json meta = {{"id", c.id},
                         {"spacing_mm", {c.image.spacing().sx, c.image.spacing().sy}},
                         {"dataset_tag", c.dataset_tag}};
  write_file(dir / "meta.json", meta.dump(2) + "\n");
}

LabeledCase load_case(const fs::path& dir) {
  for (const char* name : {"image.pgm", "mask.pgm", "meta.json"}) {
    if (!fs::exists(dir / name)) {
      throw Error(ErrorCode::MissingFile, (dir / name).string() + " not found");
    }
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCase, "meta.json: " + std::string(e.what()));
  }
  std::string id, tag;
  Spacing spacing;
  try {
    id = meta.at("id").get<std::string>();
    tag = meta.value("dataset_tag", std::string{});
    const auto& sp = meta.at("spacing_mm");
    if (!sp.is_array() || sp.size() != 2) throw Error(ErrorCode::CorruptCase, "spacing_mm");
    spacing = {sp[0].get<double>(), sp[1].get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCase, "meta.json: " + std::string(e.what()));
  }

  const PgmData img = read_pgm(dir / "image.pgm");
  const PgmData msk = read_pgm(dir / "mask.pgm");
  if (img.width != msk.width || img.height != msk.height) {
    throw Error(ErrorCode::CorruptCase, dir.string() + ": image and mask sizes differ");
  }
  std::vector<float> pixels(img.samples.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<float>(double(img.samples[i]) / img.maxval);
  }
  Mask truth(msk.width, msk.height, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto v = msk.samples[i];
    if (v != 0 && v != msk.maxval) {
      throw Error(ErrorCode::CorruptCase, dir.string() + ": mask is not binary");
    }
    truth[i] = v != 0 ? 1 : 0;
  }
  try {
    LabeledCase c{id, Image2D(img.width, img.height, std::move(pixels), spacing),
                  std::move(truth), tag};
    c.validate();
    return c;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptCase) throw;
    throw Error(ErrorCode::CorruptCase, dir.string() + ": " + e.what());
  }
}

std::vector<LabeledCase> load_case_directory(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(ErrorCode::MissingFile, root.string() + " not found");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<LabeledCase> cases;
  for (const auto& d : dirs) cases.push_back(load_case(d));
  return cases;
}

}  // namespace promptrl
