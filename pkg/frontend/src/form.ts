/** Editable DNA form state, gated by the vocabulary fetched from the server.

Dropdown-driven edits can only produce vocabulary values, but nothing stops
a hand-forced bogus value (devtools, tests), so every read of `canSubmit`
re-checks the whole record. Server-side violations are stored per field
path and cleared the moment that field is edited again.
*/

import type { DnaPayload, ValidationReportPayload, VocabResponse } from "./types.js";

const LIST_FIELDS = new Set(["traffic_controls"]);

function deepCopy<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}

export class FormState {
  private dna: DnaPayload;
  private serverErrors = new Map<string, string>();
  private edited = false;

  constructor(
    private readonly vocab: VocabResponse,
    consensus: DnaPayload,
  ) {
    this.dna = deepCopy(consensus);
  }

  /** Enum field names in display order, excluding risk_score. */
  enumFields(): { group: string; field: string }[] {
    const out: { group: string; field: string }[] = [];
    for (const [group, fields] of Object.entries(this.vocab.groups)) {
      for (const field of fields) {
        if (field !== "risk_score") out.push({ group, field });
      }
    }
    return out;
  }

  options(field: string): string[] {
    return this.vocab.fields[field] ?? [];
  }

  isListField(field: string): boolean {
    return LIST_FIELDS.has(field);
  }

  value(field: string): string {
    const group = this.groupOf(field);
    return String((this.dna as Record<string, any>)[group][field]);
  }

  listValue(field: string): string[] {
    const group = this.groupOf(field);
    const raw = (this.dna as Record<string, any>)[group][field];
    return Array.isArray(raw) ? [...raw] : [String(raw)];
  }

  get risk(): number {
    return this.dna.scenario_criticality.risk_score;
  }

  get tags(): string[] {
    return [...this.dna.wod_e2e_tags];
  }

  get description(): string {
    return this.dna.description;
  }

  get isEdited(): boolean {
    return this.edited;
  }

  setField(field: string, value: string): void {
    const group = this.groupOf(field);
    if (this.isListField(field)) {
      (this.dna as Record<string, any>)[group][field] = [value];
    } else {
      (this.dna as Record<string, any>)[group][field] = value;
    }
    this.touch(`${group}.${field}`);
  }

  setListField(field: string, values: string[]): void {
    const group = this.groupOf(field);
    (this.dna as Record<string, any>)[group][field] = [...values];
    this.touch(`${group}.${field}`);
  }

  toggleTag(tag: string): void {
    const tags = new Set(this.dna.wod_e2e_tags);
    if (tags.has(tag)) {
      tags.delete(tag);
    } else {
      tags.add(tag);
    }
    this.dna.wod_e2e_tags = this.options("wod_e2e_tags").filter((t) => tags.has(t));
    this.touch("wod_e2e_tags");
  }

  setRisk(value: number): void {
    this.dna.scenario_criticality.risk_score = value;
    this.touch("scenario_criticality.risk_score");
  }

  setDescription(text: string): void {
    this.dna.description = text;
    this.touch("description");
  }

  /** Client-side violations keyed by field path, same addressing the server uses. */
  clientErrors(): Map<string, string> {
    const errors = new Map<string, string>();
    for (const { group, field } of this.enumFields()) {
      const allowed = new Set(this.options(field));
      if (this.isListField(field)) {
        const values = this.listValue(field);
        if (values.length === 0) {
          errors.set(`${group}.${field}`, "at least one value required");
        }
        values.forEach((value, i) => {
          if (!allowed.has(value)) {
            errors.set(`${group}.${field}[${i}]`, `not in ${field} vocabulary`);
          }
        });
      } else if (!allowed.has(this.value(field))) {
        errors.set(`${group}.${field}`, `not in ${field} vocabulary`);
      }
    }
    const [low, high] = this.vocab.risk_range;
    const risk = this.dna.scenario_criticality.risk_score;
    if (!Number.isInteger(risk) || risk < low || risk > high) {
      errors.set("scenario_criticality.risk_score", `integer in [${low}, ${high}] required`);
    }
    const tagVocab = new Set(this.options("wod_e2e_tags"));
    this.dna.wod_e2e_tags.forEach((tag, i) => {
      if (!tagVocab.has(tag)) errors.set(`wod_e2e_tags[${i}]`, "not in tag vocabulary");
    });
    if (this.dna.description.trim() === "") {
      errors.set("description", "description must not be blank");
    }
    return errors;
  }

  /** Violations to render inline: server findings win over local recomputes. */
  errors(): Map<string, string> {
    const merged = this.clientErrors();
    for (const [path, message] of this.serverErrors) merged.set(path, message);
    return merged;
  }

  errorFor(fieldPath: string): string | null {
    for (const [path, message] of this.errors()) {
      if (path === fieldPath || path.startsWith(`${fieldPath}[`)) return message;
    }
    return null;
  }

  get canSubmit(): boolean {
    return this.clientErrors().size === 0;
  }

  applyServerReport(report: ValidationReportPayload): void {
    this.serverErrors.clear();
    for (const violation of report.violations) {
      this.serverErrors.set(
        violation.path,
        `${violation.expected} (got ${violation.offending_value})`,
      );
    }
  }

  applyServerViolations(violations: ValidationReportPayload["violations"]): void {
    this.applyServerReport({ valid: violations.length === 0, violations });
  }

  toDna(): DnaPayload {
    return deepCopy(this.dna);
  }

  private groupOf(field: string): string {
    for (const [group, fields] of Object.entries(this.vocab.groups)) {
      if (fields.includes(field)) return group;
    }
    throw new Error(`unknown field ${field}`);
  }

  private touch(fieldPath: string): void {
    this.edited = true;
    for (const path of [...this.serverErrors.keys()]) {
      if (path === fieldPath || path.startsWith(`${fieldPath}[`)) {
        this.serverErrors.delete(path);
      }
    }
  }
}
