#include "interleaf/lexicon.hpp"

#include "interleaf/errors.hpp"
#include "interleaf/io_util.hpp"

namespace interleaf {

namespace {

using WordSet = std::set<std::string, std::less<>>;

WordSet read_set(const nlohmann::json& j, const char* key) {
  WordSet out;
  auto it = j.find(key);
  if (it == j.end()) return out;
  if (!it->is_array()) {
    throw ValidationError(std::string("lexicon field '") + key + "' must be an array");
  }
  for (const auto& w : *it) {
    if (!w.is_string()) {
      throw ValidationError(std::string("lexicon field '") + key + "' must hold strings");
    }
    std::string word = w.get<std::string>();
    for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.insert(std::move(word));
  }
  return out;
}

Lexicon make_builtin() {
  Lexicon lx;
  lx.determiners = {"the", "a", "an", "this", "that", "these", "those", "some", "any"};
  lx.adjectives = {
      // colors
      "red", "green", "blue", "yellow", "purple", "cyan", "magenta", "pink", "brown", "black",
      "white", "gray", "grey", "silver", "golden", "gold", "beige",
      // size, shape, material, position
      "small", "big", "large", "tiny", "little", "long", "short", "round", "square", "flat",
      "tall", "wooden", "metal", "metallic", "plastic", "glass", "ceramic", "paper", "empty",
      "full", "left", "right", "top", "bottom", "upper", "lower", "middle", "front", "back",
      "dirty", "clean", "open", "closed", "striped", "dotted", "toy"};
  lx.nouns = {
      // synthetic-world shapes
      "block", "ball", "triangle", "ring", "cross", "cube", "star",
      // kitchen and tabletop objects
      "spoon", "fork", "knife", "spatula", "ladle", "microwave", "oven", "stove", "sink", "pot",
      "pan", "lid", "towel", "cloth", "napkin", "sponge", "eggplant", "carrot", "banana", "apple",
      "orange", "lemon", "corn", "pepper", "potato", "tomato", "grape", "grapes", "strawberry",
      "basket", "bowl", "plate", "cup", "mug", "glass", "bottle", "can", "jar", "box", "tray",
      "drawer", "cabinet", "shelf", "table", "counter", "rack", "bin", "bag", "container",
      "chips", "coke", "sponge", "marker", "pen", "cable", "book", "brush", "toy", "teddy",
      "bear", "duck", "block", "door", "handle", "button", "faucet", "kettle", "toaster",
      "bread", "cheese", "egg", "cucumber", "broccoli", "mushroom", "fish", "chicken", "steak",
      "dish", "dishrack", "sushi", "tape", "scissors", "screwdriver", "hammer", "shoe"};
  lx.locative_prepositions = {"near", "beside", "by", "behind", "under", "above", "below",
                              "of", "with", "from", "at", "between", "underneath", "inside"};
  lx.goal_prepositions = {"in", "into", "on", "onto", "to", "toward", "towards", "over"};
  return lx;
}

}  // namespace

const Lexicon& Lexicon::builtin() {
  static const Lexicon lexicon = make_builtin();
  return lexicon;
}

Lexicon Lexicon::from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ValidationError("lexicon must be a JSON object");
  }
  Lexicon lx;
  lx.determiners = read_set(j, "determiners");
  lx.adjectives = read_set(j, "adjectives");
  lx.nouns = read_set(j, "nouns");
  lx.locative_prepositions = read_set(j, "locative_prepositions");
  lx.goal_prepositions = read_set(j, "goal_prepositions");
  return lx;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed lexicon " + path.string() + ": " + e.what());
  }
}

nlohmann::json Lexicon::to_json() const {
  return {{"determiners", determiners},
          {"adjectives", adjectives},
          {"nouns", nouns},
          {"locative_prepositions", locative_prepositions},
          {"goal_prepositions", goal_prepositions}};
}

}  // namespace interleaf
