#include "i2drnn/manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>
#include <set>

#include "i2drnn/numerics.hpp"
#include "json.hpp"

#ifndef I2DRNN_SOURCE_ID
#define I2DRNN_SOURCE_ID "unknown"
#endif

namespace fs = std::filesystem;

namespace i2drnn {

namespace {

struct Hasher {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};
  Hasher() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256: init failed");
  }
  void update(const void* p, std::size_t n) {
    if (EVP_DigestUpdate(ctx.get(), p, n) != 1) throw IoError("sha256: update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) throw IoError("sha256: final failed");
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
      s += digits[md[i] >> 4];
      s += digits[md[i] & 15];
    }
    return s;
  }
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  Hasher h;
  h.update(data.data(), data.size());
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  Hasher h;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(f.gcount()));
  }
  return h.hex();
}

std::string source_id() { return I2DRNN_SOURCE_ID; }

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const fs::path& dir, const RunInfo& info) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != kManifestName) files.push_back(fs::relative(e.path(), dir));
  std::sort(files.begin(), files.end());
  nlohmann::json list = nlohmann::json::array();
  for (const auto& f : files)
    list.push_back({{"path", f.generic_string()}, {"sha256", sha256_file(dir / f)}, {"bytes", fs::file_size(dir / f)}});
  nlohmann::json j{{"command", info.command}, {"source", source_id()},     {"seed", info.seed},
                   {"started", info.started}, {"finished", info.finished}, {"wall_seconds", info.wall_seconds},
                   {"config", info.config},   {"files", list}};
  std::ofstream out(dir / kManifestName);
  if (!out) throw IoError("cannot write " + (dir / kManifestName).string());
  out << j.dump(2) << '\n';
}

ManifestCheck verify_manifest(const fs::path& dir) {
  ManifestCheck c;
  std::ifstream in(dir / kManifestName);
  if (!in) throw IoError("no manifest in " + dir.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest: " + std::string(e.what()));
  }
  std::set<std::string> listed;
  for (const auto& f : j.at("files")) {
    const std::string p = f.at("path").get<std::string>();
    listed.insert(p);
    if (!fs::exists(dir / p)) {
      c.problems.push_back("missing: " + p);
    } else if (sha256_file(dir / p) != f.at("sha256").get<std::string>()) {
      c.problems.push_back("hash mismatch: " + p);
    }
  }
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == kManifestName) continue;
    const std::string p = fs::relative(e.path(), dir).generic_string();
    if (!listed.count(p)) c.problems.push_back("unlisted: " + p);
  }
  c.ok = c.problems.empty();
  return c;
}

}  // namespace i2drnn
