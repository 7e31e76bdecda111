#include "tapkit/gateway/program_store.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

namespace tapkit::gateway {

namespace {

constexpr int kFormat = 1;

bool valid_id(const std::string& id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

void write_file_durably(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error(ErrorCode::kIo, "cannot write " + tmp);
  std::size_t off = 0;
  while (off < content.size()) {
    const auto n = ::write(fd, content.data() + off, content.size() - off);
    if (n <= 0) {
      ::close(fd);
      throw Error(ErrorCode::kIo, "short write to " + tmp);
    }
    off += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  std::filesystem::rename(tmp, path);
  const int dfd = ::open(path.parent_path().c_str(), O_RDONLY | O_DIRECTORY);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

}  // namespace

nlohmann::json to_json(const StoredProgram& p) {
  nlohmann::json bindings = nlohmann::json::object();
  for (const auto& [id, d] : p.bindings) bindings[id] = {{"name", d.name}, {"kind", d.kind}};
  return {{"format", kFormat},
          {"program_id", p.program_id},
          {"name", p.name},
          {"source", p.source},
          {"ast", p.ast ? lang::to_json(*p.ast) : nlohmann::json(nullptr)},
          {"bindings", bindings},
          {"programs", p.programs}};
}

StoredProgram stored_program_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<int>() != kFormat) {
      throw Error(ErrorCode::kMalformedDocument, "unsupported program document format");
    }
    StoredProgram p;
    p.program_id = j.at("program_id").get<std::string>();
    if (!valid_id(p.program_id)) throw Error(ErrorCode::kMalformedDocument, "bad program id '" + p.program_id + "'");
    p.name = j.at("name").get<std::string>();
    p.source = j.at("source").get<std::string>();
    if (!j.at("ast").is_null()) {
      p.ast = lang::program_from_json(j.at("ast"));
      if (p.ast->program_id != p.program_id) {
        throw Error(ErrorCode::kMalformedDocument, "ast and document disagree on the program id");
      }
    }
    for (const auto& [id, d] : j.at("bindings").items()) {
      p.bindings[id] = lang::DeviceTerminal{id, d.at("name").get<std::string>(), d.at("kind").get<std::string>()};
    }
    p.programs = j.at("programs").get<std::map<std::string, std::string>>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("bad program document: ") + e.what());
  }
}

lang::NameBindings name_bindings(const StoredProgram& p) {
  lang::NameBindings b;
  b.devices = p.bindings;
  b.programs = p.programs;
  return b;
}

ProgramStore::ProgramStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir_.string() + ": " + ec.message());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedDocument, f.filename().string() + ": " + e.what());
    }
    auto p = stored_program_from_json(j);
    if (f.stem() != p.program_id) {
      throw Error(ErrorCode::kMalformedDocument, f.filename().string() + ": file name and program id differ");
    }
    programs_.emplace(p.program_id, std::move(p));
  }
}

std::filesystem::path ProgramStore::file_for(const std::string& id) const { return dir_ / (id + ".json"); }

std::vector<StoredProgram> ProgramStore::list() const {
  std::vector<StoredProgram> out;
  for (const auto& [_, p] : programs_) out.push_back(p);
  return out;
}

const StoredProgram* ProgramStore::find(const std::string& id) const {
  auto it = programs_.find(id);
  return it == programs_.end() ? nullptr : &it->second;
}

const StoredProgram* ProgramStore::find_by_name(const std::string& name) const {
  for (const auto& [_, p] : programs_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

bool ProgramStore::save(const StoredProgram& p) {
  if (!valid_id(p.program_id)) throw Error(ErrorCode::kValidationFailed, "bad program id '" + p.program_id + "'");
  if (!p.name.empty()) {
    const auto* other = find_by_name(p.name);
    if (other && other->program_id != p.program_id) {
      throw Error(ErrorCode::kDuplicateName, "another program is already named '" + p.name + "'");
    }
  }
  auto it = programs_.find(p.program_id);
  if (it != programs_.end() && it->second == p) return false;
  write_file_durably(file_for(p.program_id), to_json(p).dump(2) + "\n");
  programs_[p.program_id] = p;
  ++generation_;
  return true;
}

bool ProgramStore::remove(const std::string& id) {
  auto it = programs_.find(id);
  if (it == programs_.end()) return false;
  std::filesystem::remove(file_for(id));
  programs_.erase(it);
  ++generation_;
  return true;
}

std::vector<lang::ProgramName> ProgramStore::program_names() const {
  std::vector<lang::ProgramName> out;
  for (const auto& [id, p] : programs_) {
    if (p.complete()) out.push_back({id, p.name});
  }
  return out;
}

std::string ProgramStore::fresh_id(const std::string& name) const {
  std::string base;
  for (char c : name) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) base.push_back(static_cast<char>(std::tolower(u)));
    else if (c == '-' || c == '_') base.push_back(c);
  }
  if (base.empty()) base = "program";
  if (!programs_.contains(base)) return base;
  for (int i = 2;; ++i) {
    auto candidate = base + "-" + std::to_string(i);
    if (!programs_.contains(candidate)) return candidate;
  }
}

}  // namespace tapkit::gateway
