#include "facdiff/serialize.hpp"

#include <stdexcept>

#include "json.hpp"

namespace facdiff {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json codebook_json(const Codebook& cb) {
  std::vector<int> entries(static_cast<std::size_t>(cb.raw().size()));
  for (Eigen::Index i = 0; i < cb.raw().size(); ++i) {
    entries[static_cast<std::size_t>(i)] = cb.raw().data()[i] > 0 ? 1 : -1;
  }
  return json{{"dim", cb.dim()}, {"size", cb.size()}, {"scale", cb.scale()},
              {"layout", "column_major"}, {"entries", std::move(entries)}};
}

Codebook codebook_from(const json& j) {
  const auto dim = j.at("dim").get<Eigen::Index>();
  const auto size = j.at("size").get<Eigen::Index>();
  const auto entries = j.at("entries").get<std::vector<int>>();
  if (dim < 1 || size < 1 || static_cast<Eigen::Index>(entries.size()) != dim * size) {
    throw std::invalid_argument("codebook json: entry count does not match dims");
  }
  Mat raw(dim, size);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = entries[static_cast<std::size_t>(i)];
  return Codebook(std::move(raw), j.at("scale").get<double>());
}

}  // namespace

std::string codebook_to_json(const Codebook& codebook) {
  json j = codebook_json(codebook);
  j["format"] = "facdiff.codebook";
  j["version"] = kFormatVersion;
  return j.dump();
}

Codebook codebook_from_json(const std::string& text) {
  return codebook_from(json::parse(text));
}

std::string instance_to_json(const ProblemInstance& instance) {
  json books = json::array();
  for (const auto& cb : instance.codebooks) books.push_back(codebook_json(cb));
  std::vector<double> obs(instance.observation.data(),
                          instance.observation.data() + instance.observation.size());
  json j{{"format", "facdiff.instance"},
         {"version", kFormatVersion},
         {"dim", instance.dim()},
         {"factors", instance.factors()},
         {"seed", instance.seed},
         {"noise_sigma", instance.noise_sigma},
         {"observation_scale", instance.observation_scale},
         {"true_indices", instance.true_indices},
         {"observation", std::move(obs)},
         {"codebooks", std::move(books)}};
  return j.dump();
}

ProblemInstance instance_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("format", "") != "facdiff.instance") {
    throw std::invalid_argument("instance json: unexpected format tag");
  }
  ProblemInstance inst;
  for (const auto& b : j.at("codebooks")) inst.codebooks.push_back(codebook_from(b));
  inst.true_indices = j.at("true_indices").get<std::vector<int>>();
  const auto obs = j.at("observation").get<std::vector<double>>();
  inst.observation = Eigen::Map<const Vec>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  inst.noise_sigma = j.at("noise_sigma").get<double>();
  inst.observation_scale = j.at("observation_scale").get<double>();
  inst.seed = j.at("seed").get<std::uint64_t>();
  if (inst.codebooks.size() != inst.true_indices.size()) {
    throw std::invalid_argument("instance json: factor count mismatch");
  }
  return inst;
}

}  // namespace facdiff
