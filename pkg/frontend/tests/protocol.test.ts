import { describe, expect, it } from 'vitest';

import {
	ClientFrame,
	ProtocolError,
	ServerFrame,
	encodeClientFrame,
	isServerFrame,
	isTargetFrame,
	parseClientFrame,
	parseServerFrame,
} from '../src/protocol.js';

const segmentFrame: ServerFrame = {
	type: 'segment',
	bar_index: 4,
	notes: [
		{ track: 'melody', pitch: 64, onset: 0, duration: 1, velocity: 80 },
		{ track: 'accompaniment', pitch: 48, onset: 0, duration: 0.5, velocity: 66 },
	],
	recognized: { v: 0.25, a: -0.4 },
	fused: { v: 0.5, a: 0.1 },
	latency_ms: 12.5,
};

describe('client frames', () => {
	it('round-trips through encode/parse unchanged', () => {
		const frames: ClientFrame[] = [
			{ type: 'target', v: 0.5, a: -0.25 },
			{ type: 'select_song', id: 'demo' },
			{ type: 'set_config', fusion: 'median', backend: 'rule', granularity: 'beat' },
		];
		for (const frame of frames) {
			expect(parseClientFrame(encodeClientFrame(frame))).toEqual(frame);
		}
	});

	it('refuses out-of-range targets', () => {
		expect(() => encodeClientFrame({ type: 'target', v: 1.5, a: 0 })).toThrow(ProtocolError);
		expect(isTargetFrame({ type: 'target', v: 0, a: NaN })).toBe(false);
	});

	it('refuses unknown types', () => {
		expect(() => parseClientFrame('{"type":"warp"}')).toThrow(ProtocolError);
	});
});

describe('server frames', () => {
	it('accepts every protocol frame kind', () => {
		const frames: ServerFrame[] = [
			segmentFrame,
			{ type: 'metrics', pcc: 0.1, cec: 0.2, mctc: 0.05, overall: 13.6, similarity: 7.2, rtfit: 1.9 },
			{ type: 'error', code: 'bad_json', msg: 'nope' },
			{ type: 'end_of_song' },
		];
		for (const frame of frames) {
			expect(parseServerFrame(JSON.stringify(frame))).toEqual(frame);
		}
	});

	it('segment with null recognized is valid (bootstrap step)', () => {
		const bootstrap = { ...segmentFrame, recognized: null };
		expect(isServerFrame(bootstrap)).toBe(true);
	});

	it('rejects malformed payloads', () => {
		expect(() => parseServerFrame('{oops')).toThrow(ProtocolError);
		expect(() => parseServerFrame('{"type":"segment"}')).toThrow(ProtocolError);
		expect(isServerFrame({ type: 'metrics', pcc: 'high' })).toBe(false);
	});
});
