// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/model/config.hpp"

#include <set>

#include "json.hpp"
#include "rssnet/errors.hpp"
#include "rssnet/io/hash.hpp"

namespace rssnet::model {

using nlohmann::json;

const char* to_string(DwconvPath p) {
  switch (p) {
    case DwconvPath::kNone: return "none";
    case DwconvPath::kP1: return "p1";
    case DwconvPath::kP2: return "p2";
    case DwconvPath::kP3: return "p3";
  }
  return "none";
}

DwconvPath parse_dwconv_path(const std::string& s) {
  if (s == "none") return DwconvPath::kNone;
  if (s == "p1") return DwconvPath::kP1;
  if (s == "p2") return DwconvPath::kP2;
  if (s == "p3") return DwconvPath::kP3;
  throw ConfigError("dwconv_path must be one of none, p1, p2, p3; got '" + s + "'");
}

std::size_t RssNetConfig::encoded_length() const {
  const std::size_t pad = enc_kernel / 2;
  return (L + 2 * pad - enc_kernel) / enc_stride + 1;
}

std::size_t RssNetConfig::chunk_count() const {
  const std::size_t lp = encoded_length();
  const std::size_t stride = chunk_stride();
  if (lp <= K) return 1;
  return (lp - K + stride - 1) / stride + 1;
}

void RssNetConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("model config: " + msg);
  };
  require(N >= 1, "N must be >= 1");
  require(enc_kernel >= 1, "enc_kernel must be >= 1");
  require(enc_stride >= 1, "enc_stride must be >= 1");
  require(L >= 2 && L + 2 * (enc_kernel / 2) >= enc_kernel, "L too short for the encoder kernel");
  const std::size_t lp = encoded_length();
  const std::size_t dec = (lp - 1) * enc_stride + enc_kernel - 2 * (enc_kernel / 2);
  require(dec == L, "encoder kernel/stride do not invert to length L (decoder would give " + std::to_string(dec) + ")");
  require(K >= 2, "K must be >= 2");
  require(K <= lp, "K = " + std::to_string(K) + " exceeds the encoded length " + std::to_string(lp));
  require(iter >= 1, "iter must be >= 1");
  require(S >= 1, "S must be >= 1");
  require(heads >= 1 && d_model % heads == 0,
          "d_model " + std::to_string(d_model) + " is not divisible by heads " + std::to_string(heads));
  require(ffn_dim >= 1, "ffn_dim must be >= 1");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(C >= 1, "C must be >= 1");
  require(dwconv_kernel % 2 == 1, "dwconv_kernel must be odd");
  const std::size_t min_len = std::size_t{1} << S;
  require(K >= min_len, "K = " + std::to_string(K) + " is shorter than 2^S = " + std::to_string(min_len));
  require(chunk_count() >= min_len,
          "chunk count T = " + std::to_string(chunk_count()) + " is shorter than 2^S = " + std::to_string(min_len));
}

namespace {

json to_json_value(const RssNetConfig& c) {
  return json{{"version", RssNetConfig::kVersion},
              {"N", c.N},
              {"enc_kernel", c.enc_kernel},
              {"enc_stride", c.enc_stride},
              {"L", c.L},
              {"K", c.K},
              {"iter", c.iter},
              {"S", c.S},
              {"heads", c.heads},
              {"d_model", c.d_model},
              {"ffn_dim", c.ffn_dim},
              {"dropout", c.dropout},
              {"C", c.C},
              {"dwconv_path", to_string(c.dwconv_path)},
              {"dwconv_kernel", c.dwconv_kernel},
              {"weight_sharing", c.weight_sharing}};
}

}  // namespace

std::string to_json(const RssNetConfig& c) { return to_json_value(c).dump(2) + "\n"; }

RssNetConfig config_from_json(const std::string& text) {
  RssNetConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  static const std::set<std::string> known = {"version", "N",       "enc_kernel", "enc_stride", "L",
                                              "K",       "iter",    "S",          "heads",      "d_model",
                                              "ffn_dim", "dropout", "C",          "dwconv_path", "dwconv_kernel",
                                              "weight_sharing"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("model config: unknown key '" + key + "'");
  }
  try {
    if (j.contains("version") && j["version"].get<int>() != RssNetConfig::kVersion) {
      throw CompatibilityError("model config version " + j["version"].dump() + " is not supported");
    }
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::remove_reference_t<decltype(field)>>();
    };
    get("N", c.N);
    get("enc_kernel", c.enc_kernel);
    get("enc_stride", c.enc_stride);
    get("L", c.L);
    get("K", c.K);
    get("iter", c.iter);
    get("S", c.S);
    get("heads", c.heads);
    get("d_model", c.d_model);
    get("ffn_dim", c.ffn_dim);
    get("dropout", c.dropout);
    get("C", c.C);
    get("dwconv_kernel", c.dwconv_kernel);
    get("weight_sharing", c.weight_sharing);
    if (j.contains("dwconv_path")) c.dwconv_path = parse_dwconv_path(j["dwconv_path"].get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_hash(const RssNetConfig& c) { return io::sha256_hex(to_json_value(c).dump()); }

}  // namespace rssnet::model
