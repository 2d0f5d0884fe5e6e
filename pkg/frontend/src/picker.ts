// Pattern picker: which explanation frames an annotator may choose for
// a given relation. Only patterns of the relation's type are offered,
// grouped by family, with the catch-all label always available last.

import type { Pattern, PatternFamily, Relation, RelationType } from "./types.js";

export interface PatternGroup {
  family: PatternFamily;
  patterns: Pattern[];
}

export interface PickerModel {
  groups: PatternGroup[];
  error: string | null;
}

const FAMILY_ORDER: PatternFamily[] = [
  "consequences",
  "analogy",
  "presupposition",
  "proposition",
  "quantifier",
  "other",
];

const RELATION_TYPES: RelationType[] = ["support", "rebuttal", "undercut"];

export function pickerPatterns(
  catalog: Pattern[],
  relation: Pick<Relation, "rel_type">,
): PickerModel {
  if (!RELATION_TYPES.includes(relation.rel_type)) {
    return { groups: [], error: `unknown relation type: ${relation.rel_type}` };
  }
  const byFamily = new Map<PatternFamily, Pattern[]>();
  for (const pattern of catalog) {
    const applies =
      pattern.relation_type === relation.rel_type || pattern.relation_type === null;
    if (!applies) continue;
    const bucket = byFamily.get(pattern.family) ?? [];
    bucket.push(pattern);
    byFamily.set(pattern.family, bucket);
  }
  const groups: PatternGroup[] = [];
  for (const family of FAMILY_ORDER) {
    const patterns = byFamily.get(family);
    if (patterns && patterns.length > 0) {
      groups.push({ family, patterns });
    }
  }
  return { groups, error: null };
}

export function flatPatterns(model: PickerModel): Pattern[] {
  return model.groups.flatMap((g) => g.patterns);
}

// Template preview with unfilled slots rendered as visible blanks.
export function templatePreview(pattern: Pattern): string {
  return pattern.template.replace(/\{([a-z])\}/g, (whole, name: string) =>
    pattern.slots.some((s) => s.name === name) ? `⟨${name}⟩` : whole,
  );
}

// Rendered explanation once fills exist; missing fills stay visible blanks.
export function renderTemplate(
  pattern: Pattern,
  fills: Record<string, string>,
): string {
  return pattern.template.replace(/\{([a-z])\}/g, (whole, name: string) => {
    if (!pattern.slots.some((s) => s.name === name)) return whole;
    const value = fills[name];
    return value !== undefined && value !== "" ? value : `⟨${name}⟩`;
  });
}
