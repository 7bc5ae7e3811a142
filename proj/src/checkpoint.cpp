#include "gatefuse/checkpoint.hpp"

#include <bit>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gatefuse/errors.hpp"

namespace gatefuse {

namespace {

static_assert(std::endian::native == std::endian::little, "model files are written little-endian");

using json = nlohmann::ordered_json;

json arch_json(const ArchSpec& a) {
  return {{"input_dim", a.input_dim},
          {"hidden", a.hidden},
          {"activation", to_string(a.activation)},
          {"dropout", a.dropout},
          {"num_classes", a.num_classes}};
}

ArchSpec arch_from_json(const nlohmann::json& j) {
  ArchSpec a;
  a.input_dim = j.at("input_dim").get<std::size_t>();
  a.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  a.activation = activation_from_string(j.at("activation").get<std::string>());
  a.dropout = j.at("dropout").get<double>();
  a.num_classes = j.at("num_classes").get<std::size_t>();
  return a;
}

json shapes(const std::vector<const Parameter*>& ps) {
  json out = json::array();
  for (const Parameter* p : ps) out.push_back({p->value.rows(), p->value.cols()});
  return out;
}

void write_values(std::ofstream& out, const std::vector<const Parameter*>& ps) {
  for (const Parameter* p : ps)
    out.write(reinterpret_cast<const char*>(p->value.values().data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
}

void read_values(std::ifstream& in, const std::vector<Parameter*>& ps, const nlohmann::json& expected,
                 const std::filesystem::path& path) {
  if (expected.size() != ps.size())
    throw ParseError(path.string() + ": parameter count does not match the architecture", 1);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Tensor& v = ps[i]->value;
    if (expected[i][0].get<std::size_t>() != v.rows() || expected[i][1].get<std::size_t>() != v.cols())
      throw ParseError(path.string() + ": parameter shape does not match the architecture", 1);
    if (!in.read(reinterpret_cast<char*>(v.values().data()), static_cast<std::streamsize>(v.size() * sizeof(double))))
      throw ParseError(path.string() + ": truncated parameter data", 0);
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write model file " + path.string());
  return out;
}

nlohmann::json read_header(std::ifstream& in, const std::filesystem::path& path, const char* kind) {
  if (!in) throw ConfigError("cannot open model file " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": header is not JSON: " + e.what(), 1);
  }
  if (h.value("format", "") != "gatefuse-model-1" || h.value("kind", "") != kind)
    throw ParseError(path.string() + ": not a " + std::string(kind) + " model file", 1);
  return h;
}

}  // namespace

void save_classifier(const EncoderClassifier& model, const std::filesystem::path& path) {
  auto out = open_out(path);
  const json h{{"format", "gatefuse-model-1"},
               {"kind", "classifier"},
               {"role", to_string(model.role())},
               {"arch", arch_json(model.arch())},
               {"params", shapes(model.params())}};
  out << h.dump() << '\n';
  write_values(out, model.params());
}

EncoderClassifier load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  const auto h = read_header(in, path, "classifier");
  Rng unused(0);
  EncoderClassifier model(arch_from_json(h.at("arch")), Role::new_model, unused);
  read_values(in, model.params(), h.at("params"), path);
  model.set_role(role_from_string(h.at("role").get<std::string>()));
  return model;
}

void save_gated_fusion(const GatedFusionModel& gf, const std::filesystem::path& path) {
  auto out = open_out(path);
  const json h{{"format", "gatefuse-model-1"},
               {"kind", "gated_fusion"},
               {"temperature", gf.temperature},
               {"gate_dropout", gf.gate.dropout()},
               {"arch", arch_json(gf.new_model.arch())},
               {"params", shapes(gf.new_model.params())},
               {"gate_params", shapes(gf.gate.params())}};
  out << h.dump() << '\n';
  write_values(out, gf.new_model.params());
  write_values(out, gf.gate.params());
}

GatedFusionModel load_gated_fusion(const std::filesystem::path& path,
                                   std::shared_ptr<const EncoderClassifier> old_model) {
  std::ifstream in(path, std::ios::binary);
  const auto h = read_header(in, path, "gated_fusion");
  Rng unused(0);
  const ArchSpec arch = arch_from_json(h.at("arch"));
  GatedFusionModel gf{std::move(old_model), EncoderClassifier(arch, Role::new_model, unused),
                      GateNetwork(arch.embedding_dim(), h.at("gate_dropout").get<double>(), unused),
                      h.at("temperature").get<double>()};
  read_values(in, gf.new_model.params(), h.at("params"), path);
  read_values(in, gf.gate.params(), h.at("gate_params"), path);
  return gf;
}

}  // namespace gatefuse
