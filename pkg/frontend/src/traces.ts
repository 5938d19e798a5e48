// Trace drawing for the pad overlay and the emotion variation bar. Bar
// segments are colored by the nearest discrete emotion anchor so similar
// emotions share a color. Rendering goes through a minimal 2D-context
// interface, which keeps it testable off-DOM.

import { VA } from './pad.js';
import { vaToScreen } from './pad.js';

export interface LabelAnchor {
	name: string;
	v: number;
	a: number;
	color: string;
}

const ring = (deg: number): { v: number; a: number } => ({
	v: 0.75 * Math.cos((deg * Math.PI) / 180),
	a: 0.75 * Math.sin((deg * Math.PI) / 180),
});

// Mirror of the engine's 16-label anchor layout: twelve circumferential
// anchors every 30 degrees at radius 0.75 plus four interior anchors.
export const LABEL_ANCHORS: LabelAnchor[] = [
	{ name: 'pleased', ...ring(0), color: '#e8c300' },
	{ name: 'happy', ...ring(30), color: '#f2a000' },
	{ name: 'excited', ...ring(60), color: '#f07000' },
	{ name: 'aroused', ...ring(90), color: '#e54b00' },
	{ name: 'tense', ...ring(120), color: '#d62828' },
	{ name: 'angry', ...ring(150), color: '#a4161a' },
	{ name: 'miserable', ...ring(180), color: '#6d3580' },
	{ name: 'depressed', ...ring(210), color: '#4a4e8f' },
	{ name: 'bored', ...ring(240), color: '#3a6ea5' },
	{ name: 'sleepy', ...ring(270), color: '#2d8f8f' },
	{ name: 'calm', ...ring(300), color: '#3fa34d' },
	{ name: 'relaxed', ...ring(330), color: '#86b049' },
	{ name: 'cheerful', v: 0.35, a: 0.35, color: '#ffd166' },
	{ name: 'nervous', v: -0.35, a: 0.35, color: '#b5838d' },
	{ name: 'gloomy', v: -0.35, a: -0.35, color: '#6b705c' },
	{ name: 'serene', v: 0.35, a: -0.35, color: '#83c5be' },
];

export function nearestAnchor(point: VA): LabelAnchor {
	let best = LABEL_ANCHORS[0];
	let bestDist = Infinity;
	for (const anchor of LABEL_ANCHORS) {
		const d = Math.hypot(anchor.v - point.v, anchor.a - point.a);
		if (d < bestDist) {
			best = anchor;
			bestDist = d;
		}
	}
	return best;
}

export interface Canvas2DLike {
	strokeStyle: string | unknown;
	fillStyle: string | unknown;
	lineWidth: number;
	beginPath(): void;
	moveTo(x: number, y: number): void;
	lineTo(x: number, y: number): void;
	stroke(): void;
	arc(x: number, y: number, r: number, a0: number, a1: number): void;
	fill(): void;
	fillRect(x: number, y: number, w: number, h: number): void;
	clearRect(x: number, y: number, w: number, h: number): void;
}

export interface TraceStats {
	targetPoints: number;
	recognizedPoints: number;
}

const TARGET_COLOR = '#4ea3ff';
const RECOGNIZED_COLOR = '#ff7a59';

function drawPolyline(
	ctx: Canvas2DLike,
	points: VA[],
	width: number,
	height: number,
	color: string,
): void {
	if (points.length === 0) return;
	ctx.strokeStyle = color;
	ctx.lineWidth = 1.5;
	ctx.beginPath();
	points.forEach((p, i) => {
		const s = vaToScreen(p, width, height);
		if (i === 0) ctx.moveTo(s.x, s.y);
		else ctx.lineTo(s.x, s.y);
	});
	ctx.stroke();
	const last = vaToScreen(points[points.length - 1], width, height);
	ctx.fillStyle = color;
	ctx.beginPath();
	ctx.arc(last.x, last.y, 4, 0, 2 * Math.PI);
	ctx.fill();
}

/** Draw target and recognized traces over the pad; returns what was drawn. */
export function renderTraces(
	ctx: Canvas2DLike,
	target: VA[],
	recognized: VA[],
	width: number,
	height: number,
): TraceStats {
	ctx.clearRect(0, 0, width, height);
	drawPolyline(ctx, target, width, height, TARGET_COLOR);
	drawPolyline(ctx, recognized, width, height, RECOGNIZED_COLOR);
	return { targetPoints: target.length, recognizedPoints: recognized.length };
}

/** One colored cell per recognized step; same emotion, same color. */
export function renderEmotionBar(
	ctx: Canvas2DLike,
	recognized: VA[],
	width: number,
	height: number,
): string[] {
	ctx.clearRect(0, 0, width, height);
	const colors: string[] = [];
	if (recognized.length === 0) return colors;
	const cell = width / recognized.length;
	recognized.forEach((point, i) => {
		const color = nearestAnchor(point).color;
		ctx.fillStyle = color;
		ctx.fillRect(i * cell, 0, Math.ceil(cell), height);
		colors.push(color);
	});
	return colors;
}
