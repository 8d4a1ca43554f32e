#include "dafec/sampling.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <unordered_set>

#include "dafec/errors.hpp"

namespace dafec::sampling {

using nlohmann::json;

std::string domain_name(Domain d) {
  return d == Domain::kSource ? "source" : "target";
}

Domain parse_domain(const std::string& s) {
  if (s == "source") return Domain::kSource;
  if (s == "target") return Domain::kTarget;
  throw DataError("unknown domain tag: " + s);
}

Dataset::Dataset(std::vector<Instance> instances)
    : instances_(std::move(instances)) {
  std::unordered_set<std::string> ids;
  for (int i = 0; i < static_cast<int>(instances_.size()); ++i) {
    const Instance& inst = instances_[i];
    if (inst.id.empty()) throw DataError("dataset: instance with empty id");
    if (!ids.insert(inst.id).second)
      throw DataError("dataset: duplicate instance id " + inst.id);
    if (i == 0) {
      dim_ = static_cast<int>(inst.features.size());
    } else if (inst.features.size() != dim_) {
      throw DataError("dataset: feature dimension drift at instance " + inst.id);
    }
    if (inst.label) {
      if (inst.label->empty())
        throw DataError("dataset: empty label on instance " + inst.id);
      class_index_[*inst.label].push_back(i);
    }
  }
}

std::vector<std::string> Dataset::class_ids() const {
  std::vector<std::string> out;
  out.reserve(class_index_.size());
  for (const auto& [cls, _] : class_index_) out.push_back(cls);
  return out;
}

int uniform_index(Rng& rng, int n) {
  if (n <= 0) throw std::invalid_argument("uniform_index: n must be > 0");
  // Rejection sampling for an unbiased draw.
  std::uint64_t un = static_cast<std::uint64_t>(n);
  std::uint64_t limit = Rng::max() - Rng::max() % un;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<int>(x % un);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {
// Partial Fisher-Yates: first k entries are a uniform draw without
// replacement.
std::vector<int> draw_without_replacement(std::vector<int> pool, int k, Rng& rng) {
  for (int i = 0; i < k; ++i) {
    int j = i + uniform_index(rng, static_cast<int>(pool.size()) - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}
}  // namespace

Episode sample_episode(const Dataset& ds, int way, int shot, int query_per_class,
                       Rng& rng) {
  if (way < 2 || shot < 1 || query_per_class < 1)
    throw std::invalid_argument("sample_episode: need way >= 2, shot >= 1, M >= 1");
  auto classes = ds.class_ids();
  if (static_cast<int>(classes.size()) < way)
    throw CapacityError("sample_episode: dataset has " +
                        std::to_string(classes.size()) + " classes, need " +
                        std::to_string(way));
  std::vector<int> class_pos(classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) class_pos[i] = static_cast<int>(i);
  auto chosen = draw_without_replacement(class_pos, way, rng);

  Episode ep;
  ep.way = way;
  ep.shot = shot;
  ep.query_per_class = query_per_class;
  for (int ci : chosen) {
    const std::string& cls = classes[ci];
    const auto& members = ds.class_index().at(cls);
    if (static_cast<int>(members.size()) < shot + query_per_class)
      throw CapacityError("sample_episode: class " + cls + " has " +
                          std::to_string(members.size()) + " instances, need " +
                          std::to_string(shot + query_per_class));
    auto picked = draw_without_replacement(members, shot + query_per_class, rng);
    ep.classes.push_back(cls);
    ep.support.emplace_back(picked.begin(), picked.begin() + shot);
    ep.query.emplace_back(picked.begin() + shot, picked.end());
  }
  return ep;
}

std::vector<int> sample_unlabeled(const Dataset& ds, int size, Rng& rng) {
  if (size < 1) throw std::invalid_argument("sample_unlabeled: size must be >= 1");
  if (size > ds.size())
    throw CapacityError("sample_unlabeled: requested " + std::to_string(size) +
                        " of " + std::to_string(ds.size()) + " instances");
  std::vector<int> pool(ds.size());
  for (int i = 0; i < ds.size(); ++i) pool[i] = i;
  return draw_without_replacement(std::move(pool), size, rng);
}

Dataset merge_datasets(const Dataset& source, const Dataset& pseudo) {
  if (pseudo.size() > 0 && source.size() > 0 && source.dim() != pseudo.dim())
    throw DataError("merge_datasets: feature dimension mismatch");
  for (const auto& [cls, _] : pseudo.class_index()) {
    if (source.class_index().count(cls))
      throw DataError("merge_datasets: class id collision: " + cls);
  }
  std::vector<Instance> merged = source.instances();
  merged.insert(merged.end(), pseudo.instances().begin(), pseudo.instances().end());
  return Dataset(std::move(merged));
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open dataset: " + path);
  std::vector<Instance> instances;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    Instance inst;
    try {
      inst.id = rec.at("id").get<std::string>();
      inst.domain = parse_domain(rec.at("domain").get<std::string>());
      if (!rec.at("label").is_null())
        inst.label = rec.at("label").get<std::string>();
      const auto& feats = rec.at("features");
      inst.features.resize(feats.size());
      for (std::size_t i = 0; i < feats.size(); ++i)
        inst.features[static_cast<Eigen::Index>(i)] = feats[i].get<double>();
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!inst.features.allFinite())
      throw DataError(path + ":" + std::to_string(lineno) + ": non-finite feature");
    instances.push_back(std::move(inst));
  }
  return Dataset(std::move(instances));
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open dataset for writing: " + path);
  for (const Instance& inst : ds.instances()) {
    json rec;
    rec["id"] = inst.id;
    rec["domain"] = domain_name(inst.domain);
    if (inst.label)
      rec["label"] = *inst.label;
    else
      rec["label"] = nullptr;
    json feats = json::array();
    for (Eigen::Index i = 0; i < inst.features.size(); ++i)
      feats.push_back(inst.features[i]);
    rec["features"] = feats;
    os << rec.dump() << "\n";
  }
}

}  // namespace dafec::sampling
