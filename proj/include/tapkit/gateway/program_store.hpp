#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tapkit/lang/ast.hpp"
#include "tapkit/lang/grammar.hpp"

namespace tapkit::gateway {

/// One program document on disk. Drafts carry no AST.
struct StoredProgram {
  std::string program_id;
  std::string name;
  std::string source;                // canonical text; a draft's tokens joined by spaces
  std::optional<lang::Program> ast;  // set for complete programs
  /// Device names and kinds at save time, so references survive the
  /// device's absence.
  std::map<std::string, lang::DeviceTerminal> bindings;
  std::map<std::string, std::string> programs;  // referenced program id -> name

  bool complete() const { return ast.has_value(); }
  bool operator==(const StoredProgram&) const = default;
};

nlohmann::json to_json(const StoredProgram& p);
StoredProgram stored_program_from_json(const nlohmann::json& j);

/// Names the document's references for a grammar in the known scope.
lang::NameBindings name_bindings(const StoredProgram& p);

/// Directory of `<program_id>.json` documents. Writes go through a
/// temporary file and a rename, so a document is either old or new.
class ProgramStore {
 public:
  explicit ProgramStore(std::filesystem::path dir);

  std::vector<StoredProgram> list() const;
  const StoredProgram* find(const std::string& id) const;
  const StoredProgram* find_by_name(const std::string& name) const;
  /// False when the document is identical to the stored one (nothing written).
  bool save(const StoredProgram& p);
  bool remove(const std::string& id);
  /// Bumped by every effective save or removal.
  std::uint64_t generation() const { return generation_; }
  /// Complete programs as the grammar lists them.
  std::vector<lang::ProgramName> program_names() const;
  /// An id derived from `name` that no other document uses.
  std::string fresh_id(const std::string& name) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path file_for(const std::string& id) const;

  std::filesystem::path dir_;
  std::map<std::string, StoredProgram> programs_;
  std::uint64_t generation_ = 0;
};

}  // namespace tapkit::gateway
