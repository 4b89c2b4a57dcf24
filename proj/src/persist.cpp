#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "json.hpp"
#include "noisyei/errors.hpp"
#include "noisyei/study.hpp"

namespace nei {
namespace {

using nlohmann::json;

json measurement_json(const Measurement& m) { return json{{"mean", m.mean}, {"sd", m.sd}}; }

// Reads fields of one object and remembers which keys were consumed so the
// rest can be reported as unknown.
class Reader {
 public:
  Reader(const json& obj, std::string where, std::vector<std::string>* warnings)
      : obj_(obj), where_(std::move(where)), warnings_(warnings) {
    if (!obj_.is_object()) throw ParseError(where_ + ": expected an object");
  }
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  ~Reader() {
    if (!warnings_) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) warnings_->push_back(where_ + ": ignoring unknown field '" + it.key() + "'");
    }
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) throw ParseError(where_ + ": missing field '" + key + "'");
    return *it;
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  template <typename T>
  T get(const std::string& key) {
    const json& v = at(key);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ParseError(where_ + ": field '" + key + "' has the wrong type");
    }
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    return find(key) ? get<T>(key) : fallback;
  }

  const std::string& where() const { return where_; }

 private:
  const json& obj_;
  std::string where_;
  std::vector<std::string>* warnings_;
  std::set<std::string> seen_;
};

Measurement read_measurement(const json& j, const std::string& where, std::vector<std::string>* warnings) {
  Reader r(j, where, warnings);
  return Measurement{r.get<double>("mean"), r.get<double>("sd")};
}

std::string line_context(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  std::ostringstream out;
  out << "line " << line << ", column " << column;
  return out.str();
}

}  // namespace

std::string to_json(const StudyState& state) {
  json dims = json::array();
  for (const auto& d : state.space.dims) {
    dims.push_back({{"name", d.name}, {"lower", d.lower}, {"upper", d.upper}, {"integer", d.integer}});
  }
  json trials = json::array();
  for (const auto& t : state.trials) {
    json x = json::array();
    for (Eigen::Index i = 0; i < t.x.size(); ++i) x.push_back(t.x(i));
    json cons = json::array();
    for (const auto& c : t.constraints) cons.push_back(measurement_json(c));
    trials.push_back({{"x", x},
                      {"objective", t.objective ? measurement_json(*t.objective) : json(nullptr)},
                      {"constraints", cons},
                      {"status", t.status == TrialStatus::completed ? "completed" : "pending"},
                      {"tag", t.tag}});
  }
  const auto& c = state.config;
  json doc = {{"schema_version", state.schema_version},
              {"space", {{"dims", dims}}},
              {"num_constraints", state.num_constraints},
              {"config",
               {{"qmc_samples", c.qmc_samples},
                {"restarts", c.restarts},
                {"seed", c.seed},
                {"scan_points", c.scan_points},
                {"penalty_sigma", c.penalty_sigma},
                {"init_size", c.init_size},
                {"maximize", c.maximize}}},
              {"trials", trials}};
  return doc.dump(2) + "\n";
}

StudyState from_json(const std::string& text, std::vector<std::string>* warnings) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed study file at " + line_context(text, e.byte) + ": " + e.what());
  }

  Reader top(doc, "study", warnings);
  const int version = top.get<int>("schema_version");
  if (version != kSchemaVersion) {
    throw IncompatibleVersion("study schema_version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kSchemaVersion) + ")");
  }

  StudyState state;
  state.schema_version = version;
  {
    Reader space(top.at("space"), "space", warnings);
    const json& dims = space.at("dims");
    if (!dims.is_array()) throw ParseError("space.dims: expected an array");
    for (std::size_t i = 0; i < dims.size(); ++i) {
      Reader r(dims[i], "space.dims[" + std::to_string(i) + "]", warnings);
      state.space.dims.push_back(
          {r.get<std::string>("name"), r.get<double>("lower"), r.get<double>("upper"), r.get_or("integer", false)});
    }
  }
  state.num_constraints = top.get<std::size_t>("num_constraints");
  {
    Reader r(top.at("config"), "config", warnings);
    auto& c = state.config;
    c.qmc_samples = r.get_or("qmc_samples", c.qmc_samples);
    c.restarts = r.get_or("restarts", c.restarts);
    c.seed = r.get<std::uint64_t>("seed");
    c.scan_points = r.get_or("scan_points", c.scan_points);
    c.penalty_sigma = r.get_or("penalty_sigma", c.penalty_sigma);
    c.init_size = r.get_or("init_size", c.init_size);
    c.maximize = r.get_or("maximize", c.maximize);
  }
  try {
    state = create_study(state.space, state.num_constraints, state.config);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid study definition: ") + e.what());
  }

  const json& trials = top.at("trials");
  if (!trials.is_array()) throw ParseError("trials: expected an array");
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const std::string where = "trials[" + std::to_string(i) + "]";
    Reader r(trials[i], where, warnings);
    TrialRecord t;
    const auto x = r.get<std::vector<double>>("x");
    t.x = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
    if (const json* obj = r.find("objective"); obj && !obj->is_null()) {
      t.objective = read_measurement(*obj, where + ".objective", warnings);
    }
    if (const json* cons = r.find("constraints")) {
      if (!cons->is_array()) throw ParseError(where + ".constraints: expected an array");
      for (std::size_t j = 0; j < cons->size(); ++j) {
        t.constraints.push_back(
            read_measurement((*cons)[j], where + ".constraints[" + std::to_string(j) + "]", warnings));
      }
    }
    const auto status = r.get<std::string>("status");
    if (status == "completed") {
      t.status = TrialStatus::completed;
    } else if (status == "pending") {
      t.status = TrialStatus::pending;
    } else {
      throw ParseError(where + ".status: unknown status '" + status + "'");
    }
    t.tag = r.get_or<std::string>("tag", "");
    state.trials.push_back(std::move(t));
  }
  // Validate the trials without tell's de-duplication so loading is exact.
  for (std::size_t i = 0; i < state.trials.size(); ++i) {
    try {
      StudyState probe = state;
      probe.trials.clear();
      tell(std::move(probe), {state.trials[i]});
    } catch (const InvalidArgument& e) {
      throw ParseError("trials[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return state;
}

std::filesystem::path write_temp(const StudyState& state, const std::filesystem::path& path) {
  auto temp = path;
  temp += ".tmp." + std::to_string(::getpid());
  const std::string text = to_json(state);
  std::ofstream out(temp, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + temp.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + temp.string() + "'");
  return temp;
}

void save(const StudyState& state, const std::filesystem::path& path) {
  const auto temp = write_temp(state, path);
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    std::filesystem::remove(temp, ec);
    throw IoError("cannot replace '" + path.string() + "'");
  }
}

StudyState load(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open study file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return from_json(buf.str(), warnings);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace nei
