/** Session state for the control panel.
 *
 * Invariants:
 *  - restores are debounced (~150 ms) and sequence-numbered; a response is
 *    dropped unless it answers the newest issued request, so the view never
 *    goes backwards while dragging
 *  - the displayed control value always comes from the same response as the
 *    displayed image (both update atomically)
 *  - failures raise a banner and leave the previous view intact
 *  - all numbers shown are verbatim service values; nothing is recomputed
 */

import { Client, DegradationSpec, RestoreResponse, SweepReport } from "./api.js";
import { debounce, Debounced } from "./debounce.js";

export interface View {
  /** slider position (target control value) */
  alpha: number;
  /** response the panes currently show, if any */
  result: RestoreResponse | null;
  inputImage: string | null;
  groundTruth: string | null;
  sweep: SweepReport | null;
  busy: boolean;
  sweepBusy: boolean;
  error: string | null;
}

export class Session {
  readonly view: View = {
    alpha: 0.5,
    result: null,
    inputImage: null,
    groundTruth: null,
    sweep: null,
    busy: false,
    sweepBusy: false,
    error: null,
  };

  private seq = 0;         // newest issued restore request
  private readonly debouncedRestore: Debounced<[number]>;

  constructor(
    private readonly api: Client,
    private readonly render: (view: View) => void,
    debounceMs = 150,
  ) {
    this.debouncedRestore = debounce((alpha: number) => {
      void this.issueRestore(alpha);
    }, debounceMs);
  }

  setImage(imageB64: string, groundTruthB64: string | null): void {
    this.view.inputImage = imageB64;
    this.view.groundTruth = groundTruthB64;
    this.view.result = null;
    this.view.sweep = null;
    this.view.error = null;
    this.render(this.view);
    this.debouncedRestore(this.view.alpha);
  }

  /** slider moved: update the target immediately, restore after the quiet gap */
  setAlpha(alpha: number): void {
    this.view.alpha = alpha;
    this.render(this.view);
    if (this.view.inputImage !== null) {
      this.debouncedRestore(alpha);
    }
  }

  /** e.g. a click on the sweep chart: jump the slider and restore */
  jumpTo(alpha: number): void {
    this.setAlpha(alpha);
    this.debouncedRestore.flush();
  }

  private async issueRestore(alpha: number): Promise<void> {
    const image = this.view.inputImage;
    if (image === null) return;
    const ticket = ++this.seq;
    this.view.busy = true;
    this.render(this.view);
    try {
      const result = await this.api.restore({
        image,
        alpha_in: alpha,
        ...(this.view.groundTruth !== null ? { ground_truth: this.view.groundTruth } : {}),
      });
      if (ticket !== this.seq) return; // superseded by a newer drag position
      this.view.result = result;
      this.view.error = null;
    } catch (err) {
      if (ticket !== this.seq) return;
      this.view.error = err instanceof Error ? err.message : String(err);
      // previous result intentionally retained
    } finally {
      if (ticket === this.seq) {
        this.view.busy = false;
        this.render(this.view);
      }
    }
  }

  async runSweep(spec: DegradationSpec, alphas: number[]): Promise<void> {
    const gt = this.view.groundTruth;
    if (gt === null) {
      this.view.error = "sweep needs a ground-truth image";
      this.render(this.view);
      return;
    }
    this.view.sweepBusy = true;
    this.view.error = null;
    this.render(this.view);
    try {
      // chart values are used exactly as returned; no client-side resampling
      this.view.sweep = await this.api.sweep({ images: [gt], spec, alphas });
    } catch (err) {
      this.view.error = err instanceof Error ? err.message : String(err);
    } finally {
      this.view.sweepBusy = false;
      this.render(this.view);
    }
  }
}
