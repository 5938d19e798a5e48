import { describe, expect, it } from 'vitest';

import { NoteEvent, SegmentFrame } from '../src/protocol.js';
import { SegmentScheduler } from '../src/scheduler.js';
import { OscillatorPlayer, midiToHz } from '../src/synth.js';

function segment(barIndex: number, notes: NoteEvent[] = []): SegmentFrame {
	return {
		type: 'segment',
		bar_index: barIndex,
		notes,
		recognized: null,
		fused: { v: 0, a: 0 },
		latency_ms: 5,
	};
}

function harness(bpm = 120) {
	const clock = { currentTime: 0 };
	const played: { pitch: number; when: number; stop: number }[] = [];
	const player = {
		play(note: NoteEvent, when: number, spb: number) {
			played.push({ pitch: note.pitch, when, stop: when + note.duration * spb });
		},
	};
	return { clock, played, scheduler: new SegmentScheduler(clock, player, { bpm }) };
}

describe('segment scheduler', () => {
	it('two consecutive segments start exactly 8 s apart at 120 BPM', () => {
		const h = harness(120);
		const first = h.scheduler.enqueue(segment(0));
		h.clock.currentTime = 1.0; // second frame arrives during playback
		const second = h.scheduler.enqueue(segment(4));
		const gap = second.startSeconds - first.startSeconds;
		expect(Math.abs(gap - 8.0)).toBeLessThan(0.030); // < 30 ms error
		expect(h.scheduler.stalled).toBe(false);
	});

	it('chains gaplessly across many segments', () => {
		const h = harness(120);
		const starts: number[] = [];
		for (let i = 0; i < 15; i++) {
			starts.push(h.scheduler.enqueue(segment(i * 4)).startSeconds);
			h.clock.currentTime += 2.0;
		}
		for (let i = 1; i < starts.length; i++) {
			expect(starts[i] - starts[i - 1]).toBeCloseTo(8.0, 9);
		}
	});

	it('notes land inside their segment at beat offsets', () => {
		const h = harness(120);
		const notes: NoteEvent[] = [
			{ track: 'melody', pitch: 60, onset: 0, duration: 1, velocity: 80 },
			{ track: 'melody', pitch: 64, onset: 15, duration: 1, velocity: 80 },
		];
		const start = h.scheduler.enqueue(segment(0, notes)).startSeconds;
		expect(h.played[0].when).toBeCloseTo(start, 9);
		expect(h.played[1].when).toBeCloseTo(start + 15 * 0.5, 9);
	});

	it('a late frame raises the stall flag and restarts cleanly', () => {
		const h = harness(120);
		h.scheduler.enqueue(segment(0));
		h.clock.currentTime = 9.0; // past the end of segment 0's slot
		const entry = h.scheduler.enqueue(segment(4));
		expect(h.scheduler.stalled).toBe(true);
		expect(entry.startSeconds).toBeGreaterThan(9.0);
	});

	it('empty queue produces silence', () => {
		const h = harness();
		expect(h.played).toHaveLength(0);
	});
});

describe('oscillator player', () => {
	it('schedules voices at the requested times', () => {
		const events: { freq: number; start: number; stop: number }[] = [];
		const ctx = {
			currentTime: 0,
			destination: {},
			createOscillator() {
				const voice = {
					type: 'sine',
					frequency: { value: 0 },
					connect() {},
					start(when: number) {
						events.push({ freq: voice.frequency.value, start: when, stop: NaN });
					},
					stop(when: number) {
						events[events.length - 1].stop = when;
					},
				};
				return voice;
			},
			createGain: () => ({ gain: { value: 0 }, connect() {} }),
		};
		const player = new OscillatorPlayer(ctx);
		player.play({ track: 'melody', pitch: 69, onset: 0, duration: 2, velocity: 100 }, 1.25, 0.5);
		expect(events[0].freq).toBeCloseTo(440, 6);
		expect(events[0].start).toBeCloseTo(1.25, 9);
		expect(events[0].stop).toBeCloseTo(2.25, 9);
		expect(midiToHz(57)).toBeCloseTo(220, 6);
	});
});
