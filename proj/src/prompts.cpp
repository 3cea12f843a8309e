// Prompt text for few-shot DAG-MATH sampling and for the three-stage gold
// DAG construction.

#include <sstream>

#include "dagmath/error.hpp"
#include "dagmath/ingestion.hpp"

namespace dagmath {
namespace {

using nlohmann::json;

constexpr const char* kFewshotInstructions = R"(You solve competition mathematics problems and write the solution as a dependency graph of small steps.

Output one JSON object of the form {"steps": [...]} and nothing else. Every element of "steps" has exactly these four fields:

step_id
  An integer. Ids are unique and increase strictly from one step to the next.

edge
  The justification for this step, written before its conclusion. Say what the step is for, name each earlier step it uses as "Step k" (one "Step" per id, never "Steps 2 and 3"), and name the rule or operation that turns those inputs into the conclusion.

direct_dependent_steps
  The smallest list of earlier step ids that the edge actually uses, sorted ascending, for example [2, 5]. Use null when the step only restates a given fact from the problem. Every id in the list must be smaller than the current step_id.

node
  A single sentence that asserts exactly one thing: an equation, a definition, a computed value. Facts from the problem and intermediate results each get their own step.

Graph rules:
  - Each step except the last must be listed as a dependency by at least one later step; a step nothing depends on does not belong in the solution.
  - The last step's node reads "The final answer is $\boxed{...}$".
  - Write mathematics in LaTeX between dollar signs.
)";

constexpr const char* kBadExamples = R"(Counter-examples (do not imitate):

1. The edge uses steps 4 and 9 but never names them, so the dependencies cannot be checked against the text.
{
  "steps": [
    ...
    {
      "step_id": 12,
      "edge": "Adding the two partial counts gives the total number of arrangements.",
      "direct_dependent_steps": [4, 9],
      "node": "The total is $18 + 24 = 42$."
    },
    ...
  ]
}

2. The edge cites "Steps 3 and 5" in plural form instead of "Step 3 and Step 5", and the node packs two assertions into one sentence.
{
  "steps": [
    ...
    {
      "step_id": 7,
      "edge": "From Steps 3 and 5 we substitute $x = 2$ into both equations.",
      "direct_dependent_steps": [3, 5],
      "node": "Then $y = 7$ and $z = -1$."
    },
    ...
  ]
}
)";

constexpr const char* kOutputContract =
    R"(Reply with a single JSON object {"steps": [{"step_id", "edge", "direct_dependent_steps", "node"}, ...]} and no surrounding text.)";

constexpr const char* kStage1 = R"(Rewrite the reference solution below as a numbered list of atomic steps.

  - One sentence per step, and one mathematical or logical claim per sentence.
  - Spell out every small move on its own line: setting up an equation, substituting, simplifying, converting.
  - Every given fact, formula or intermediate value used later gets its own step.
  - Leave out anything the final answer does not depend on.
  - The last step reads "The final answer is \boxed{...}".
  - Write mathematics in LaTeX between dollar signs.

Return {"steps": [{"step_id": 1, "text": "..."}, ...]}.
)";

constexpr const char* kStage2 = R"(You will receive a problem and its solution as JSON: "problem_text", "final_answer" and "steps", each step carrying an integer "step_id" and a "text".

For every step add "direct_dependent_steps":
  - null when the step restates something given in the problem;
  - otherwise the smallest ascending list of earlier step ids the step is derived from directly, for example [2, 3].

Constraints:
  - Every listed id must exist in the input and be smaller than the current step_id.
  - When you are done, every step except the last must be listed by some later step. If one is not, revise the lists and check again.
  - Keep the same steps in the same order; the count must not change.
  - If the input is malformed (missing fields, ids missing or not increasing), return only {"error": "<short description>"}.

Return {"steps": [{"step_id", "text", "direct_dependent_steps"}, ...]}.
)";

constexpr const char* kStage3 = R"(You will receive a solved problem as JSON whose steps carry "step_id", "text" and "direct_dependent_steps". Write a justification paragraph ("edge") for every step.

  - When the step has dependencies, explain how each one leads to this step and name each by its id as "Step k". Leaving out any listed dependency is an error, so check every edge before returning.
  - When the dependency list is null, say that the step comes from the problem statement or from standard background knowledge such as a definition or theorem.
  - Name the principle or operation used: a counting rule, an identity, an algebraic move, an arithmetic evaluation.
  - Say briefly why the step is needed at this point in the solution.
  - For arithmetic, show the computation and a quick check of the result.
  - Use present tense and active voice. Each edge must make sense with only the step and its cited dependencies in view.
  - Do not introduce facts beyond the problem statement and the cited steps.

Return only {"edges": [{"step_id": 1, "edge": "..."}, ...]} in the original step order.
)";

std::string render_demo(const Demonstration& d, std::size_t number) {
  std::ostringstream os;
  os << "Example " << number << "\nProblem: " << d.problem_text << "\nSolution:\n"
     << trajectory_to_json(d.trajectory).dump(2) << "\n";
  return os.str();
}

json draft_json(const Problem& problem, std::span<const DraftStep> steps, bool with_parents) {
  json arr = json::array();
  for (const auto& s : steps) {
    json item{{"step_id", s.step_id}, {"text", s.text}};
    if (with_parents) {
      item["direct_dependent_steps"] = s.direct_dependent_steps ? json(*s.direct_dependent_steps) : json(nullptr);
    }
    arr.push_back(std::move(item));
  }
  return json{{"problem_text", problem.statement}, {"final_answer", problem.ground_truth}, {"steps", arr}};
}

}  // namespace

std::string PromptBundle::render() const {
  std::string out = system_text;
  if (!demonstration_blocks.empty()) {
    out += "\nWorked examples:\n\n";
    for (const auto& block : demonstration_blocks) out += block + "\n";
  }
  out += "\n";
  out += kBadExamples;
  out += "\nProblem: " + problem_text + "\n\n" + expected_output_contract + "\n\nSolution:\n";
  return out;
}

std::vector<ChatMessage> PromptBundle::messages() const { return {{"user", render()}}; }

PromptBundle assemble_fewshot_prompt(const Problem& problem, std::span<const Demonstration> demos,
                                     std::size_t shots) {
  if (demos.size() < shots) {
    throw Error(ErrorCode::kInsufficientDemos, std::to_string(shots) + " shots requested but only " +
                                                   std::to_string(demos.size()) + " demonstrations available");
  }
  PromptBundle b;
  b.system_text = kFewshotInstructions;
  for (std::size_t i = 0; i < shots; ++i) b.demonstration_blocks.push_back(render_demo(demos[i], i + 1));
  b.problem_text = problem.statement;
  b.expected_output_contract = kOutputContract;
  return b;
}

StagePrompts assemble_stage_prompts(const Problem& problem, const std::string& reference_solution) {
  if (reference_solution.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::kInsufficientInput,
                "stage 1 needs a reference solution for problem " + problem.problem_id);
  }
  StagePrompts p;
  p.stage1 = std::string(kStage1) + "\nProblem: " + problem.statement + "\n\nReference solution: " +
             reference_solution + "\n\nSteps:\n";
  p.stage2_instructions = kStage2;
  p.stage3_instructions = kStage3;
  return p;
}

std::string stage2_prompt(const StagePrompts& p, const Problem& problem, std::span<const DraftStep> nodes) {
  return p.stage2_instructions + "\n" + draft_json(problem, nodes, false).dump(2) + "\n";
}

std::string stage3_prompt(const StagePrompts& p, const Problem& problem, std::span<const DraftStep> annotated) {
  return p.stage3_instructions + "\n" + draft_json(problem, annotated, true).dump(2) + "\n";
}

}  // namespace dagmath
