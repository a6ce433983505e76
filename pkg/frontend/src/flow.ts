/** List -> detail -> save-and-advance controller, view-agnostic.

Most frames need no edits, so the primary action is "accept as-is": submit
the pre-filled consensus and jump to the next unverified frame. A rejected
submit (422) parks the violations on the form for inline rendering; a
transport failure keeps all edits and asks for a retry.
*/

import { ApiClient, ApiError } from "./api.js";
import { FormState } from "./form.js";
import type { FrameDetail, FrameSummary, VocabResponse } from "./types.js";

export type FlowStatus = "idle" | "loading" | "saving" | "error";

export class CuratorFlow {
  frames: FrameSummary[] = [];
  total = 0;
  currentIndex: number | null = null;
  detail: FrameDetail | null = null;
  form: FormState | null = null;
  status: FlowStatus = "idle";
  notice = "";
  retryable = false;

  private listeners: (() => void)[] = [];

  constructor(
    readonly client: ApiClient,
    readonly vocab: VocabResponse,
    public annotator: string = "anonymous",
  ) {}

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private changed(): void {
    for (const listener of this.listeners) listener();
  }

  async loadList(page = 1, pageSize = 200): Promise<void> {
    this.status = "loading";
    this.changed();
    try {
      const body = await this.client.getFrames(page, pageSize);
      this.frames = body.frames;
      this.total = body.total;
      this.status = "idle";
      this.notice = "";
    } catch (error) {
      this.status = "error";
      this.notice = `could not load frames: ${describe(error)}`;
      this.retryable = true;
    }
    this.changed();
  }

  async open(index: number): Promise<void> {
    const summary = this.frames[index];
    if (!summary) return;
    this.status = "loading";
    this.changed();
    try {
      this.detail = await this.client.getFrame(summary.frame_id);
      this.currentIndex = index;
      // Pre-fill with the curated label when one exists, else the consensus.
      const base = this.detail.gold ? this.detail.gold.dna : this.detail.dna;
      this.form = new FormState(this.vocab, base);
      this.status = "idle";
      this.notice = "";
      this.retryable = false;
    } catch (error) {
      this.status = "error";
      this.notice = `could not load frame: ${describe(error)}`;
      this.retryable = !(error instanceof ApiError) || error.status !== 404;
    }
    this.changed();
  }

  async openNextUnverified(after: number | null = null): Promise<boolean> {
    const start = after === null ? 0 : after + 1;
    for (let i = start; i < this.frames.length; i += 1) {
      const frame = this.frames[i];
      if (frame && !frame.verified) {
        await this.open(i);
        return true;
      }
    }
    this.currentIndex = null;
    this.detail = null;
    this.form = null;
    this.notice = "every listed frame is verified";
    this.changed();
    return false;
  }

  /** Commit the form; returns true when the label was accepted. */
  async submit(options: { force?: boolean } = {}): Promise<boolean> {
    if (!this.form || !this.detail || this.currentIndex === null) return false;
    if (!options.force && !this.form.canSubmit) {
      this.notice = "fix the highlighted fields before saving";
      this.changed();
      return false;
    }
    this.status = "saving";
    this.changed();
    const index = this.currentIndex;
    const frameId = this.detail.frame_id;
    try {
      await this.client.submitGold(frameId, {
        dna: this.form.toDna(),
        annotator: this.annotator,
      });
    } catch (error) {
      this.status = "error";
      if (error instanceof ApiError && error.isValidation) {
        this.form.applyServerViolations(error.violations);
        this.notice = "the server rejected the label; fix the marked fields";
        this.retryable = false;
      } else {
        // Edits stay on the form; the user can retry the same submit.
        this.notice = `save failed: ${describe(error)}; your edits are kept`;
        this.retryable = true;
      }
      this.changed();
      return false;
    }
    const summary = this.frames[index];
    if (summary) summary.verified = true;
    this.detail.verified = true;
    this.status = "idle";
    this.notice = `saved ${frameId}`;
    this.retryable = false;
    this.changed();
    await this.openNextUnverified(index);
    return true;
  }

  /** Zero-edit path: submit the pre-filled consensus unchanged. */
  acceptAsIs(): Promise<boolean> {
    return this.submit();
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    return error.status === 0 ? `network error (${error.message})` : error.message;
  }
  return String(error);
}
