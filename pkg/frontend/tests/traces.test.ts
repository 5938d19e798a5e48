import { describe, expect, it } from 'vitest';

import { Canvas2DLike, nearestAnchor, renderEmotionBar, renderTraces } from '../src/traces.js';

function fakeContext() {
	const ops: string[] = [];
	const ctx: Canvas2DLike = {
		strokeStyle: '',
		fillStyle: '',
		lineWidth: 1,
		beginPath: () => ops.push('beginPath'),
		moveTo: () => ops.push('moveTo'),
		lineTo: () => ops.push('lineTo'),
		stroke: () => ops.push('stroke'),
		arc: () => ops.push('arc'),
		fill: () => ops.push('fill'),
		fillRect: () => ops.push('fillRect'),
		clearRect: () => ops.push('clearRect'),
	};
	return { ctx, ops };
}

describe('nearest anchor', () => {
	it('full-valence point lands on the pleased anchor', () => {
		expect(nearestAnchor({ v: 0.9, a: 0 }).name).toBe('pleased');
	});

	it('quadrant corners pick distinct anchors', () => {
		const names = new Set(
			[
				{ v: 0.8, a: 0.8 },
				{ v: -0.8, a: 0.8 },
				{ v: -0.8, a: -0.8 },
				{ v: 0.8, a: -0.8 },
			].map((p) => nearestAnchor(p).name),
		);
		expect(names.size).toBe(4);
	});
});

describe('pad trace overlay', () => {
	it('draws both traces for a 15-step session', () => {
		const { ctx, ops } = fakeContext();
		const target = Array.from({ length: 15 }, (_, i) => ({
			v: Math.sin(i / 3),
			a: Math.cos(i / 2),
		}));
		const recognized = target.map((p) => ({ v: p.v * 0.8, a: p.a * 0.8 }));
		const stats = renderTraces(ctx, target, recognized, 400, 400);
		expect(stats).toEqual({ targetPoints: 15, recognizedPoints: 15 });
		// two polylines -> two strokes; 14 lineTo per polyline
		expect(ops.filter((o) => o === 'stroke')).toHaveLength(2);
		expect(ops.filter((o) => o === 'lineTo')).toHaveLength(28);
	});

	it('empty traces draw nothing but the clear', () => {
		const { ctx, ops } = fakeContext();
		renderTraces(ctx, [], [], 400, 400);
		expect(ops).toEqual(['clearRect']);
	});
});

describe('emotion bar', () => {
	it('constant emotion gives a single color', () => {
		const { ctx } = fakeContext();
		const colors = renderEmotionBar(ctx, Array(10).fill({ v: 0.7, a: 0.1 }), 400, 24);
		expect(new Set(colors).size).toBe(1);
	});

	it('alternating quadrants alternate colors', () => {
		const { ctx } = fakeContext();
		const points = Array.from({ length: 8 }, (_, i) =>
			i % 2 === 0 ? { v: 0.8, a: 0.8 } : { v: -0.8, a: -0.8 },
		);
		const colors = renderEmotionBar(ctx, points, 400, 24);
		expect(new Set(colors).size).toBe(2);
		expect(colors[0]).not.toBe(colors[1]);
		expect(colors[0]).toBe(colors[2]);
	});

	it('one cell per recognized step', () => {
		const { ctx, ops } = fakeContext();
		renderEmotionBar(ctx, Array(15).fill({ v: 0, a: 0 }), 400, 24);
		expect(ops.filter((o) => o === 'fillRect')).toHaveLength(15);
	});
});
