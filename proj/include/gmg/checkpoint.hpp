#pragma once

#include <fstream>
#include <memory>
#include <string>

#include "gmg/binary_io.hpp"
#include "gmg/config.hpp"

namespace gmg {

/// Checkpoint layout, integers little-endian:
///   "GMGC" | u8 version (1) | u32 manifest length | JSON manifest
///   | f32 parameter blobs in manifest order | f32 optimizer moments (m then v per parameter)
/// The manifest echoes the training config and lists name, shape and dtype of every blob.
constexpr char kCheckpointMagic[4] = {'G', 'M', 'G', 'C'};
constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  int step = 0;
  std::unique_ptr<GmgModel<float>> model;
  AdamState optimizer;
};

inline void write_checkpoint(std::ostream& os, const TrainConfig& cfg, int step, const GmgModel<float>& model,
                             const AdamState& opt) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : model.params()) params.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"dtype", "f32"}});
  const bool moments = opt.m.size() == model.params().count();
  nlohmann::json manifest = {{"format", "gmg-checkpoint"},
                             {"config", to_json(cfg)},
                             {"step", step},
                             {"params", params},
                             {"optimizer", {{"kind", to_string(cfg.optimizer)}, {"step", opt.step}, {"moments", moments}}}};
  const std::string m = manifest.dump();
  os.write(kCheckpointMagic, 4);
  io::put_le<std::uint8_t>(os, kCheckpointVersion);
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.size()));
  os.write(m.data(), static_cast<std::streamsize>(m.size()));
  for (const auto& p : model.params()) io::put_f32_array(os, p->value.data(), p->size());
  if (moments)
    for (std::size_t i = 0; i < opt.m.size(); ++i) {
      io::put_f32_array(os, opt.m[i].data(), opt.m[i].size());
      io::put_f32_array(os, opt.v[i].data(), opt.v[i].size());
    }
}

inline void save_checkpoint(const std::string& path, const TrainConfig& cfg, int step, const GmgModel<float>& model,
                            const AdamState& opt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_checkpoint(os, cfg, step, model, opt);
  if (!os) throw IoError("write failed for " + path);
}

inline Checkpoint read_checkpoint(std::istream& is, const std::string& what) {
  io::Reader r(is, what);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw HeaderError(what + ": bad magic (not a GMG checkpoint)");
  const auto version = r.le<std::uint8_t>("version");
  if (version != kCheckpointVersion) throw HeaderError(what + ": unsupported checkpoint version " + std::to_string(version));
  const auto len = r.le<std::uint32_t>("manifest length");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(r.string(len, "manifest"));
  } catch (const nlohmann::json::exception& e) {
    throw HeaderError(what + ": manifest is not valid JSON (" + e.what() + ")");
  }
  Checkpoint ck;
  ck.config = train_config_from_json(manifest.at("config"));
  ck.step = manifest.at("step");
  ck.model = std::make_unique<GmgModel<float>>(ck.config.model);
  const auto& listed = manifest.at("params");
  auto& ps = ck.model->params();
  if (listed.size() != ps.count())
    throw HeaderError(what + ": manifest lists " + std::to_string(listed.size()) + " parameters, config builds " +
                      std::to_string(ps.count()));
  for (std::size_t i = 0; i < ps.count(); ++i) {
    const auto& e = listed[i];
    if (e.at("dtype") != "f32") throw DtypeError(what + ": parameter " + e.at("name").get<std::string>() + " is not f32");
    if (e.at("name") != ps[i].name || e.at("shape").get<Shape>() != ps[i].value.shape())
      throw HeaderError(what + ": parameter #" + std::to_string(i) + " (" + e.at("name").get<std::string>() +
                        ") does not match the model built from the config");
    r.f32_array(ps[i].value.data(), ps[i].size(), "parameter data");
  }
  const auto& o = manifest.at("optimizer");
  ck.optimizer.step = o.at("step");
  if (o.at("moments").get<bool>()) {
    for (std::size_t i = 0; i < ps.count(); ++i) {
      ck.optimizer.m.emplace_back(ps[i].size());
      ck.optimizer.v.emplace_back(ps[i].size());
      r.f32_array(ck.optimizer.m.back().data(), ps[i].size(), "optimizer moments");
      r.f32_array(ck.optimizer.v.back().data(), ps[i].size(), "optimizer moments");
    }
  }
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_checkpoint(is, path);
}

}  // namespace gmg
