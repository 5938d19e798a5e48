import { describe, expect, it } from 'vitest';

import { TargetEmitter } from '../src/emitter.js';
import { TargetFrame, isTargetFrame } from '../src/protocol.js';

function harness() {
	let now = 0;
	const sent: { frame: TargetFrame; t: number }[] = [];
	const emitter = new TargetEmitter((frame) => sent.push({ frame, t: now }), {
		now: () => now,
	});
	return {
		emitter,
		sent,
		advance(ms: number) {
			// the app drives tick() every 100 ms
			const end = now + ms;
			while (now < end) {
				now = Math.min(end, now + 100);
				emitter.tick();
			}
		},
		setNow(t: number) {
			now = t;
		},
	};
}

describe('target emitter', () => {
	it('emits schema-valid frames at >= 1 Hz while dragging', () => {
		const h = harness();
		h.emitter.dragStart(0.2, 0.2);
		// finger rests for five seconds mid-drag
		h.advance(5000);
		h.emitter.dragEnd();

		expect(h.sent.length).toBeGreaterThanOrEqual(5);
		for (const { frame } of h.sent) {
			expect(isTargetFrame(frame)).toBe(true);
		}
		for (let i = 1; i < h.sent.length; i++) {
			expect(h.sent[i].t - h.sent[i - 1].t).toBeLessThanOrEqual(1000);
		}
	});

	it('emits on change', () => {
		const h = harness();
		h.emitter.dragStart(0, 0);
		h.advance(200);
		h.emitter.update(0.5, 0.5);
		expect(h.sent.at(-1)?.frame).toEqual({ type: 'target', v: 0.5, a: 0.5 });
	});

	it('rate-caps rapid movement but flushes the last position', () => {
		const h = harness();
		h.emitter.dragStart(0, 0);
		for (let i = 1; i <= 50; i++) {
			h.emitter.update(i / 100, 0); // 50 moves within the same instant
		}
		const immediately = h.sent.length;
		expect(immediately).toBeLessThanOrEqual(2);
		h.advance(200); // next tick flushes the final position
		expect(h.sent.at(-1)?.frame.v).toBeCloseTo(0.5, 9);
	});

	it('goes quiet after the drag ends', () => {
		const h = harness();
		h.emitter.dragStart(0.1, 0.1);
		h.advance(1000);
		h.emitter.dragEnd();
		const count = h.sent.length;
		h.advance(3000);
		expect(h.sent.length).toBe(count);
	});
});
