import type { RegexAst } from "./types.js";
import { letterFor } from "./palette.js";

// Precedence levels, loosest first. A child rendered at a tighter required
// level than its own gets wrapped in parens, nothing else does.
const ALT = 0;
const CONCAT = 1;
const POSTFIX = 2;

function level(node: RegexAst): number {
  switch (node.kind) {
    case "or":
      return ALT;
    case "concat":
      return CONCAT;
    case "star":
    case "plus":
    case "optional":
      return POSTFIX;
    default:
      return 3;
  }
}

/** Regex text for an AST, with minimal parenthesization. */
export function renderRegex(node: RegexAst): string {
  return render(node, ALT);
}

function render(node: RegexAst, required: number): string {
  let text: string;
  switch (node.kind) {
    case "epsilon":
      // Bare empty constraint is ""; nested it needs the explicit empty
      // group to survive re-parsing.
      return required > ALT ? "()" : "";
    case "state":
      text = letterFor(node.state);
      break;
    case "any":
      text = ".";
      break;
    case "star":
      text = render(node.child, POSTFIX) + "*";
      break;
    case "plus":
      text = render(node.child, POSTFIX) + "+";
      break;
    case "optional":
      text = render(node.child, POSTFIX) + "?";
      break;
    case "concat":
      text = node.children.map((c) => render(c, CONCAT)).join("");
      break;
    case "or":
      text = node.children.map((c) => render(c, CONCAT)).join("|");
      break;
  }
  return level(node) < required ? "(" + text + ")" : text;
}
