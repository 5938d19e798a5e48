// Target-frame emitter: sends on movement (rate-capped) and keeps a
// >= 1 Hz heartbeat while the user is dragging, so the server always has
// a fresh target even when the finger rests.

import { TargetFrame } from './protocol.js';

export interface EmitterOptions {
	minIntervalMs?: number; // movement rate cap
	heartbeatMs?: number; // max silence while dragging
	epsilon?: number; // movement smaller than this is "unchanged"
	now?: () => number;
}

export class TargetEmitter {
	private readonly minIntervalMs: number;
	private readonly heartbeatMs: number;
	private readonly epsilon: number;
	private readonly now: () => number;
	private lastSent: { v: number; a: number; t: number } | null = null;
	private pending: { v: number; a: number } | null = null;
	dragging = false;

	constructor(
		private readonly send: (frame: TargetFrame) => void,
		opts: EmitterOptions = {},
	) {
		this.minIntervalMs = opts.minIntervalMs ?? 100;
		this.heartbeatMs = opts.heartbeatMs ?? 1000;
		this.epsilon = opts.epsilon ?? 1e-3;
		this.now = opts.now ?? (() => performance.now());
	}

	dragStart(v: number, a: number): void {
		this.dragging = true;
		this.emit(v, a);
	}

	dragEnd(): void {
		this.dragging = false;
	}

	/** Pointer moved; emits when changed and the rate cap allows. */
	update(v: number, a: number): void {
		const t = this.now();
		if (this.lastSent !== null) {
			const moved =
				Math.hypot(v - this.lastSent.v, a - this.lastSent.a) > this.epsilon;
			if (!moved) return;
			if (t - this.lastSent.t < this.minIntervalMs) {
				this.pending = { v, a };
				return;
			}
		}
		this.emit(v, a);
	}

	/** Drive from a timer (e.g. every 100 ms): flushes pending movement and
	 * keeps the >= 1 Hz heartbeat alive while dragging. */
	tick(): void {
		const t = this.now();
		if (this.pending !== null && (this.lastSent === null || t - this.lastSent.t >= this.minIntervalMs)) {
			const { v, a } = this.pending;
			this.emit(v, a);
			return;
		}
		if (
			this.dragging &&
			this.lastSent !== null &&
			t - this.lastSent.t >= this.heartbeatMs
		) {
			this.emit(this.lastSent.v, this.lastSent.a);
		}
	}

	private emit(v: number, a: number): void {
		this.send({ type: 'target', v, a });
		this.lastSent = { v, a, t: this.now() };
		this.pending = null;
	}
}
